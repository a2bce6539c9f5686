#pragma once

// Multi-threaded micro-benchmarks over every lock kind. Workers are
// declared big or little (emulation mode) and inflate their work through
// emulated_work, so the asymmetric behaviour shows up on symmetric hosts.
//
// One worker iteration is one epoch:
//
//   [epoch_start] lock -> CS(cs_base_ns * length) -> unlock [epoch_end]
//   non-critical work (non_cs_ns)
//
// Epoch latency is measured around the bracketed part.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#if defined(__linux__)
#include <sys/prctl.h>
#endif

#include "asl/harness/recorder.hpp"
#include "asl/harness/report.hpp"
#include "asl/locks.hpp"
#include "asl/platform.hpp"
#include "asl/reorderable.hpp"
#include "asl/runtime.hpp"

namespace asl::harness {

enum class LockKind { mcs, tas, ticket, proportional, asl, mutex };
enum class InnerKind { queue, mutex };
enum class StandbyChoice { automatic, spin, sleep };

inline std::string to_string(LockKind k) {
  switch (k) {
    case LockKind::mcs: return "mcs";
    case LockKind::tas: return "tas";
    case LockKind::ticket: return "ticket";
    case LockKind::proportional: return "proportional";
    case LockKind::asl: return "asl";
    case LockKind::mutex: return "mutex";
  }
  return "?";
}

inline std::optional<LockKind> parse_lock_kind(const std::string& s) {
  for (LockKind k : {LockKind::mcs, LockKind::tas, LockKind::ticket, LockKind::proportional,
                     LockKind::asl, LockKind::mutex}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct MixEntry {
  double length = 1.0;  // multiplier on cs_base_ns
  double ratio = 1.0;
};

/// A stretch of the run with a fixed CS length multiplier. `random` draws
/// a power of two in [1, multiplier] for every epoch instead.
struct LoadPhase {
  double duration_s = 1.0;
  double multiplier = 1.0;
  bool random = false;
};

struct BenchConfig {
  std::string scenario = "bench";
  LockKind lock = LockKind::asl;
  unsigned n_big = 4;
  unsigned n_little = 4;
  std::optional<std::uint64_t> slo_ns;  // none: no epochs, little cores use the max window
  double duration_s = 1.0;
  std::uint64_t cs_base_ns = 1000;
  std::uint64_t non_cs_ns = 0;
  std::vector<MixEntry> mix{{1.0, 1.0}};
  unsigned oversubscription = 1;  // threads per emulated core
  std::uint64_t seed = 1;
  bool pin = true;
  EmulationProfile profile;
  unsigned batch = 10;
  InnerKind inner = InnerKind::queue;
  StandbyChoice standby = StandbyChoice::automatic;
  std::uint64_t sleep_ns = 20'000;
  std::uint64_t sleep_floor_ns = 1'000'000;  // automatic standby only
  RuntimeConfig runtime;
  double warmup_fraction = 0.1;
  std::vector<LoadPhase> phases;  // empty: constant load for duration_s
  bool keep_samples = false;

  unsigned threads() const noexcept { return (n_big + n_little) * oversubscription; }

  double total_duration() const noexcept {
    if (phases.empty()) return duration_s;
    double d = 0;
    for (auto& p : phases) d += p.duration_s;
    return d;
  }

  bool uses_epochs() const noexcept { return lock == LockKind::asl && slo_ns.has_value(); }

  void validate() const {
    if (n_big + n_little == 0) throw ConfigError("need at least one big or little thread");
    if (oversubscription == 0) throw ConfigError("oversubscription must be >= 1");
    if (!(total_duration() > 0.0)) throw ConfigError("duration must be > 0");
    if (mix.empty()) throw ConfigError("epoch mix is empty");
    double sum = 0;
    for (auto& m : mix) {
      if (m.ratio < 0 || !(m.length > 0)) throw ConfigError("bad epoch mix entry");
      sum += m.ratio;
    }
    if (std::fabs(sum - 1.0) > 1e-6) throw ConfigError("epoch mix ratios must sum to 1");
    for (auto& p : phases) {
      if (!(p.duration_s > 0) || !(p.multiplier >= 1.0)) throw ConfigError("bad load phase");
    }
    if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw ConfigError("bad warm-up fraction");
    if (batch == 0) throw ConfigError("batch must be >= 1");
    runtime.validate();
    if (mix.size() > static_cast<std::size_t>(runtime.max_epochs)) {
      throw ConfigError("epoch mix has more entries than max_epochs");
    }
  }
};

// Per-thread, seeded: the same seed and thread index give the same sequence.
class EpochMixGenerator {
 public:
  EpochMixGenerator(const std::vector<MixEntry>& mix, std::uint64_t seed, unsigned thread)
      : rng_(seed * 0x9E3779B97F4A7C15ull + thread + 1) {
    double acc = 0;
    for (auto& m : mix) {
      acc += m.ratio;
      cumulative_.push_back(acc);
    }
  }

  std::size_t next_index() {
    if (cumulative_.size() == 1) return 0;
    double u = uniform_(rng_) * cumulative_.back();
    for (std::size_t i = 0; i < cumulative_.size(); ++i) {
      if (u < cumulative_[i]) return i;
    }
    return cumulative_.size() - 1;
  }

  // Power of two in [1, max_multiplier].
  double next_random_multiplier(double max_multiplier) {
    int steps = static_cast<int>(std::floor(std::log2(max_multiplier))) + 1;
    return std::ldexp(1.0, static_cast<int>(rng_() % static_cast<std::uint64_t>(steps)));
  }

  std::mt19937_64& engine() noexcept { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::vector<double> cumulative_;
};

struct Sample {
  std::uint64_t end_ns = 0;  // relative to run start
  std::uint32_t latency_ns = 0;
  std::uint32_t window_ns = 0;  // ASL little epochs: window after epoch_end
  std::uint8_t phase = 0;
  std::uint8_t mix = 0;
};

struct WorkerResult {
  CoreClass cls = CoreClass::Big;
  std::vector<Sample> samples;
  std::uint64_t completed = 0;
  PinStatus pin = PinStatus::unsupported;
};

struct RunOutput {
  std::vector<WorkerResult> workers;
  std::uint64_t elapsed_ns = 0;
  Topology topology;
};

inline StandbyMode resolve_standby(const BenchConfig& cfg) {
  switch (cfg.standby) {
    case StandbyChoice::spin: return StandbyMode::spin;
    case StandbyChoice::sleep: return StandbyMode::sleep;
    case StandbyChoice::automatic: break;
  }
  return cfg.threads() > online_cpu_count() ? StandbyMode::sleep : StandbyMode::spin;
}

inline CoreClass worker_class(const BenchConfig& cfg, unsigned worker) {
  unsigned core = worker % (cfg.n_big + cfg.n_little);
  return core < cfg.n_big ? CoreClass::Big : CoreClass::Little;
}

namespace detail {

inline std::size_t phase_at(const BenchConfig& cfg, double elapsed_s) {
  double acc = 0;
  for (std::size_t i = 0; i < cfg.phases.size(); ++i) {
    acc += cfg.phases[i].duration_s;
    if (elapsed_s < acc) return i;
  }
  return cfg.phases.empty() ? 0 : cfg.phases.size() - 1;
}

inline void reduce_timer_slack() {
#if defined(__linux__)
  prctl(PR_SET_TIMERSLACK, 1000UL, 0, 0, 0);
#endif
}

}  // namespace detail

/// Runs the worker threads. `acquire(lock, node, cls)` / `release(lock, node)`
/// wrap the lock, `body(worker, cls, length, rng)` is the critical section.
template <class Lock, class Acquire, class Release, class Body>
RunOutput run_workers(const BenchConfig& cfg, Lock& lock, Acquire acquire, Release release,
                      Body body) {
  if (!(cfg.profile.iterations_per_ns > 0.0)) {
    throw CalibrationError("emulation profile is not calibrated");
  }
  const unsigned n = cfg.threads();
  const bool epochs = cfg.uses_epochs();
  std::vector<int> epoch_ids;
  if (epochs) {
    for (std::size_t i = 0; i < cfg.mix.size(); ++i) epoch_ids.push_back(next_epoch_id());
  }
  const std::vector<int> cores = allowed_cores();
  const double total_s = cfg.total_duration();

  RunOutput out;
  out.workers.resize(n);
  std::atomic<unsigned> ready{0};
  std::atomic<bool> go{false};
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> start_ns{0};

  auto worker = [&](unsigned w) {
    WorkerResult& res = out.workers[w];
    res.cls = worker_class(cfg, w);
    declare_thread_class(res.cls);
    detail::reduce_timer_slack();
    if (cfg.pin) res.pin = pin_thread(cores[w % cores.size()]);
    EpochMixGenerator gen(cfg.mix, cfg.seed, w);
    typename Lock::Node node;
    std::size_t reserve = cfg.keep_samples ? 1 << 16 : 1 << 14;
    res.samples.reserve(reserve);

    ready.fetch_add(1);
    while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
    const std::uint64_t t0 = start_ns.load(std::memory_order_relaxed);

    while (!stop.load(std::memory_order_relaxed)) {
      std::size_t mix = gen.next_index();
      double length = cfg.mix[mix].length;
      std::uint8_t phase = 0;
      if (!cfg.phases.empty()) {
        std::uint64_t now = now_ns();
        phase = static_cast<std::uint8_t>(detail::phase_at(cfg, static_cast<double>(now - t0) * 1e-9));
        const LoadPhase& p = cfg.phases[phase];
        length *= p.random ? gen.next_random_multiplier(p.multiplier) : p.multiplier;
      }

      std::uint64_t begin = now_ns();
      if (epochs) epoch_start(epoch_ids[mix]);
      acquire(lock, node, res.cls);
      body(w, res.cls, length, gen.engine());
      release(lock, node);
      std::uint32_t window = 0;
      if (epochs) {
        epoch_end(epoch_ids[mix], *cfg.slo_ns);
        if (res.cls == CoreClass::Little) {
          window = static_cast<std::uint32_t>(
              std::min<std::uint64_t>(this_thread_epochs().state(epoch_ids[mix]).window, UINT32_MAX));
        }
      }
      std::uint64_t end = now_ns();
      std::uint64_t latency = end - begin;
      res.samples.push_back(Sample{end - t0,
                                   static_cast<std::uint32_t>(std::min<std::uint64_t>(latency, UINT32_MAX)),
                                   window, phase, static_cast<std::uint8_t>(mix)});
      ++res.completed;
      if (cfg.non_cs_ns) emulated_work(cfg.non_cs_ns, res.cls, cfg.profile);
    }
    clear_thread_class();
  };

  std::vector<std::thread> threads;
  threads.reserve(n);
  for (unsigned w = 0; w < n; ++w) threads.emplace_back(worker, w);
  while (ready.load() < n) std::this_thread::yield();
  std::uint64_t t_start = now_ns();
  start_ns.store(t_start, std::memory_order_relaxed);
  go.store(true, std::memory_order_release);
  std::this_thread::sleep_for(std::chrono::nanoseconds(static_cast<std::uint64_t>(total_s * 1e9)));
  stop.store(true, std::memory_order_relaxed);
  out.elapsed_ns = now_ns() - t_start;
  for (auto& t : threads) t.join();

  out.topology.cpus = online_cpu_count();
  out.topology.pinned = cfg.pin;
  for (auto& w : out.workers) out.topology.pinned = out.topology.pinned && w.pin == PinStatus::pinned;
  out.topology.emulate_a = cfg.profile.inflation;
  out.topology.iterations_per_ns = cfg.profile.iterations_per_ns;
  if (resolve_standby(cfg) == StandbyMode::spin) {
    out.topology.standby = "spin";
  } else {
    out.topology.standby = cfg.standby == StandbyChoice::automatic ? "sleep+spin" : "sleep";
  }
  return out;
}

inline std::string lock_label(const BenchConfig& cfg) {
  std::string s = to_string(cfg.lock);
  if (cfg.lock == LockKind::asl) {
    if (cfg.inner == InnerKind::mutex) s += "-mutex";
    s += cfg.slo_ns ? "-" + std::to_string(*cfg.slo_ns) : std::string("-max");
  }
  if (cfg.lock == LockKind::proportional) s += "-" + std::to_string(cfg.batch);
  return s;
}

/// Aggregates samples ending in [from, to) (run-relative ns) into a report.
inline BenchReport build_report(const BenchConfig& cfg, const RunOutput& run, std::uint64_t from,
                                std::uint64_t to) {
  BenchReport r;
  r.scenario = cfg.scenario;
  r.lock = lock_label(cfg);
  r.n_big = cfg.n_big * cfg.oversubscription;
  r.n_little = cfg.n_little * cfg.oversubscription;
  r.slo_ns = cfg.slo_ns;
  r.cs_ns = cfg.cs_base_ns;
  r.non_cs_ns = cfg.non_cs_ns;
  r.topology = run.topology;
  double span_s = static_cast<double>(to - from) * 1e-9;
  r.measured_s = span_s;

  LatencyRecorder rec;
  for (auto& w : run.workers) {
    if (w.completed != w.samples.size()) r.accounting_ok = false;
    (w.cls == CoreClass::Big ? r.big : r.little).acquisitions += w.completed;
    for (auto& s : w.samples) {
      if (s.end_ns >= from && s.end_ns < to) rec.add(w.cls, s.latency_ns);
    }
  }
  std::uint64_t acq_big = r.big.acquisitions, acq_little = r.little.acquisitions;
  r.big = summarize(rec, CoreClass::Big, span_s);
  r.little = summarize(rec, CoreClass::Little, span_s);
  r.overall = summarize(rec, std::nullopt, span_s);
  r.big.acquisitions = acq_big;
  r.little.acquisitions = acq_little;
  r.overall.acquisitions = acq_big + acq_little;
  r.throughput = r.overall.throughput;
  r.cdf_big = rec.cdf(CoreClass::Big);
  r.cdf_little = rec.cdf(CoreClass::Little);
  r.cdf_overall = rec.cdf();
  if (cfg.slo_ns) r.violation_fraction = rec.fraction_above(*cfg.slo_ns);
  return r;
}

inline BenchReport build_report(const BenchConfig& cfg, const RunOutput& run) {
  auto warm = static_cast<std::uint64_t>(cfg.warmup_fraction * static_cast<double>(run.elapsed_ns));
  return build_report(cfg, run, warm, run.elapsed_ns);
}

// Default critical section: emulated work scaled by the epoch length.
inline auto emulated_body(const BenchConfig& cfg) {
  return [&cfg](unsigned, CoreClass cls, double length, std::mt19937_64&) {
    emulated_work(static_cast<std::uint64_t>(static_cast<double>(cfg.cs_base_ns) * length), cls,
                  cfg.profile);
  };
}

/// Builds the configured lock and runs `body` as the critical section.
template <class Body>
RunOutput run_with_lock(const BenchConfig& cfg, Body body) {
  cfg.validate();
  configure(cfg.runtime);
  auto plain_acquire = [](auto& l, auto& n, CoreClass) { l.lock(n); };
  auto plain_release = [](auto& l, auto& n) { l.unlock(n); };
  switch (cfg.lock) {
    case LockKind::mcs: {
      auto l = std::make_unique<QueueLock>();
      return run_workers(cfg, *l, plain_acquire, plain_release, body);
    }
    case LockKind::tas: {
      auto l = std::make_unique<TasLock>();
      return run_workers(cfg, *l, plain_acquire, plain_release, body);
    }
    case LockKind::ticket: {
      auto l = std::make_unique<TicketLock>();
      return run_workers(cfg, *l, plain_acquire, plain_release, body);
    }
    case LockKind::mutex: {
      auto l = std::make_unique<MutexLock>();
      return run_workers(cfg, *l, plain_acquire, plain_release, body);
    }
    case LockKind::proportional: {
      auto l = std::make_unique<ProportionalLock>(cfg.batch);
      return run_workers(
          cfg, *l, [](ProportionalLock& pl, ProportionalLock::Node& n, CoreClass c) { pl.lock(n, c); },
          plain_release, body);
    }
    case LockKind::asl: {
      ReorderOptions opts = cfg.runtime.reorder_options();
      opts.standby = resolve_standby(cfg);
      opts.sleep_ns = cfg.sleep_ns;
      if (cfg.standby == StandbyChoice::automatic) opts.sleep_floor_ns = cfg.sleep_floor_ns;
      auto asl_acquire = [](auto& l, auto& n, CoreClass) { asl_lock(l, n); };
      auto asl_release = [](auto& l, auto& n) { asl_unlock(l, n); };
      if (cfg.inner == InnerKind::mutex) {
        auto l = std::make_unique<ReorderableLock<MutexLock>>(opts);
        return run_workers(cfg, *l, asl_acquire, asl_release, body);
      }
      auto l = std::make_unique<ReorderableLock<QueueLock>>(opts);
      return run_workers(cfg, *l, asl_acquire, asl_release, body);
    }
  }
  throw ConfigError("unknown lock kind");
}

inline BenchReport run_scenario(const BenchConfig& cfg) {
  return build_report(cfg, run_with_lock(cfg, emulated_body(cfg)));
}

}  // namespace asl::harness
