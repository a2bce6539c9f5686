#pragma once

// Closed-form throughput expressions and a deterministic discrete-event
// model of lock policies on asymmetric cores.
//
// The simulator works in integer time units (one unit is a fraction of a
// big-core critical section, `cs_big` units per big CS) so every run is
// exact and reproducible. Each thread cycles
//
//   request -> wait (per policy) -> critical section -> non-critical work
//
// with lock hand-off taking zero time. Events at the same instant are
// processed in thread-id order, big threads first (ids 0..n_big-1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "asl/platform.hpp"
#include "asl/runtime.hpp"

namespace asl::model {

/// Normalized throughput when `x` big critical sections run before each
/// little one and the little one is `a` times slower: (x+1)/(x+a).
inline double theoretical_throughput(double x, double a) {
  if (x < 0.0) throw std::invalid_argument("x must be >= 0");
  if (!(a >= 1.0)) throw std::invalid_argument("a must be >= 1");
  return (x + 1.0) / (x + a);
}

/// Gain of running only big cores over strict big/little alternation.
inline double speedup_upper_bound(double a) {
  if (!(a >= 1.0)) throw std::invalid_argument("a must be >= 1");
  return (a + 1.0) / 2.0 - 1.0;
}

inline constexpr std::uint64_t kInfiniteWindow = std::numeric_limits<std::uint64_t>::max();

enum class PolicyKind { fifo, tas_affinity, proportional, window, slo_feedback };

struct Policy {
  PolicyKind kind = PolicyKind::fifo;
  CoreClass favored = CoreClass::Big;  // tas_affinity
  double mix_probability = 0.0;        // tas_affinity: chance of a uniformly random winner
  unsigned batch = 10;                 // proportional
  std::uint64_t window = 0;            // window
  std::uint64_t slo = 0;               // slo_feedback: latency target (request -> release)
  SloConfig feedback{99, 1, kInfiniteWindow / 2};

  static Policy fifo() { return {}; }
  static Policy tas_affinity(CoreClass favored, double mix = 0.0) {
    Policy p;
    p.kind = PolicyKind::tas_affinity;
    p.favored = favored;
    p.mix_probability = mix;
    return p;
  }
  static Policy proportional(unsigned batch) {
    Policy p;
    p.kind = PolicyKind::proportional;
    p.batch = batch;
    return p;
  }
  static Policy with_window(std::uint64_t w) {
    Policy p;
    p.kind = PolicyKind::window;
    p.window = w;
    return p;
  }
  static Policy slo_feedback(std::uint64_t slo, int pct = 99, std::uint64_t min_unit = 1,
                             std::uint64_t max_window = kInfiniteWindow / 2) {
    Policy p;
    p.kind = PolicyKind::slo_feedback;
    p.slo = slo;
    p.feedback = SloConfig{pct, min_unit, max_window};
    return p;
  }
};

struct SimConfig {
  unsigned n_big = 4;
  unsigned n_little = 4;
  double a = 4.7;
  std::uint64_t cs_big = 10;
  std::uint64_t non_cs = 0;
  Policy policy;
  std::uint64_t horizon = 10'000;  // critical sections to execute
  std::uint64_t threshold = 1;     // windows shorter than this enqueue at once
  std::uint64_t cs_jitter = 0;     // each CS gets +U[0, cs_jitter] units
  std::uint64_t seed = 1;
  double warmup_fraction = 0.1;
  bool record_grants = false;

  std::uint64_t cs_little() const noexcept {
    return static_cast<std::uint64_t>(std::llround(a * static_cast<double>(cs_big)));
  }

  void validate() const {
    if (!(a >= 1.0)) throw std::invalid_argument("a must be >= 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (n_big + n_little == 0) throw std::invalid_argument("need at least one thread");
    if (cs_big == 0) throw std::invalid_argument("cs_big must be > 0");
    double exact = a * static_cast<double>(cs_big);
    if (std::fabs(exact - static_cast<double>(cs_little())) > 1e-9 * std::max(1.0, exact)) {
      throw std::invalid_argument("a * cs_big must be an integer number of time units");
    }
    if (policy.kind == PolicyKind::tas_affinity &&
        (policy.mix_probability < 0.0 || policy.mix_probability > 1.0)) {
      throw std::invalid_argument("mix_probability must be in [0, 1]");
    }
    if (policy.kind == PolicyKind::slo_feedback) policy.feedback.validate();
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
      throw std::invalid_argument("warmup_fraction must be in [0, 1)");
    }
  }
};

struct ClassStats {
  std::uint64_t acquisitions = 0;
  double mean_wait = 0.0;
  std::uint64_t p99_wait = 0;
  std::uint64_t max_wait = 0;
};

struct WindowSample {
  unsigned thread = 0;
  std::uint64_t latency = 0;
  std::uint64_t window_used = 0;
  std::uint64_t window_after = 0;
  std::uint64_t unit_after = 0;
};

struct Grant {
  unsigned thread;
  std::uint64_t time;
};

struct SimResult {
  std::uint64_t makespan = 0;     // completion time of the last CS
  std::uint64_t cs_executed = 0;
  std::uint64_t busy_time = 0;    // sum of CS durations
  double throughput = 0.0;        // CS per time unit, whole horizon
  double utilization = 0.0;       // busy_time / makespan
  double normalized_throughput = 0.0;         // CS per big-CS duration
  double steady_normalized_throughput = 0.0;  // same, over whole steady-state cycles
  ClassStats big;
  ClassStats little;
  std::vector<std::uint64_t> per_thread_busy;
  std::vector<std::uint64_t> per_thread_count;
  std::vector<WindowSample> window_trajectory;  // slo_feedback only, little epochs in order
  std::vector<Grant> grants;                    // when record_grants
};

// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t nearest_rank(std::vector<std::uint64_t>& v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    unsigned n = cfg_.n_big + cfg_.n_little;
    threads_.resize(n);
    for (unsigned i = 0; i < n; ++i) {
      threads_[i].cls = i < cfg_.n_big ? CoreClass::Big : CoreClass::Little;
      threads_[i].epochs = EpochTable(1, cfg_.policy.feedback);
    }
    result_.per_thread_busy.assign(n, 0);
    result_.per_thread_count.assign(n, 0);
    starts_.resize(n);
  }

  SimResult run() {
    for (unsigned i = 0; i < threads_.size(); ++i) request(i, 0);
    settle(0);
    while (result_.cs_executed < cfg_.horizon) {
      std::uint64_t t = next_event_time();
      if (t == kNever) throw std::logic_error("simulation deadlocked");
      for (unsigned i = 0; i < threads_.size() && result_.cs_executed < cfg_.horizon; ++i) {
        if (threads_[i].event == t) fire(i, t);
      }
      settle(t);
    }
    finish();
    return std::move(result_);
  }

 private:
  static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

  enum class Phase { idle, standby, queued, holding };

  struct Thread {
    CoreClass cls = CoreClass::Big;
    Phase phase = Phase::idle;
    std::uint64_t event = kNever;  // end of idle / standby / holding
    std::uint64_t request_time = 0;
    std::uint64_t window_used = 0;
    EpochTable epochs;
  };

  bool uses_windows() const noexcept {
    return cfg_.policy.kind == PolicyKind::window || cfg_.policy.kind == PolicyKind::slo_feedback;
  }

  bool lock_free() const noexcept { return holder_ < 0 && waiters_.empty(); }

  std::uint64_t next_event_time() const noexcept {
    std::uint64_t t = kNever;
    for (auto& th : threads_) t = std::min(t, th.event);
    return t;
  }

  std::uint64_t window_for(unsigned i) {
    if (cfg_.policy.kind == PolicyKind::window) return cfg_.policy.window;
    return threads_[i].epochs.state(0).window;
  }

  void request(unsigned i, std::uint64_t t) {
    Thread& th = threads_[i];
    th.request_time = t;
    th.event = kNever;
    if (th.cls == CoreClass::Little && uses_windows()) {
      std::uint64_t w = window_for(i);
      th.window_used = w;
      if (w >= cfg_.threshold && !lock_free()) {
        th.phase = Phase::standby;
        th.event = w == kInfiniteWindow || t > kNever - w ? kNever : t + w;
        return;
      }
    }
    enqueue(i, t);
  }

  void enqueue(unsigned i, std::uint64_t t) {
    threads_[i].event = kNever;
    if (lock_free()) {
      grant(i, t);
    } else {
      threads_[i].phase = Phase::queued;
      waiters_.push_back(i);
    }
  }

  void grant(unsigned i, std::uint64_t t) {
    Thread& th = threads_[i];
    holder_ = static_cast<int>(i);
    th.phase = Phase::holding;
    std::uint64_t cs = th.cls == CoreClass::Big ? cfg_.cs_big : cfg_.cs_little();
    if (cfg_.cs_jitter > 0) cs += rng_() % (cfg_.cs_jitter + 1);
    th.event = t + cs;
    waits_[static_cast<int>(th.cls)].push_back(t - th.request_time);
    starts_[i].push_back(t);
    all_starts_.push_back(t);
    result_.per_thread_busy[i] += cs;
    result_.busy_time += cs;
    if (cfg_.record_grants) result_.grants.push_back({i, t});
  }

  std::size_t pick_waiter() {
    const Policy& p = cfg_.policy;
    switch (p.kind) {
      case PolicyKind::tas_affinity: {
        if (p.mix_probability > 0.0 && unit_(rng_) < p.mix_probability) {
          return static_cast<std::size_t>(rng_() % waiters_.size());
        }
        for (std::size_t k = 0; k < waiters_.size(); ++k) {
          if (threads_[waiters_[k]].cls == p.favored) return k;
        }
        return 0;
      }
      case PolicyKind::proportional: {
        std::size_t first_big = waiters_.size(), first_little = waiters_.size();
        for (std::size_t k = 0; k < waiters_.size(); ++k) {
          auto cls = threads_[waiters_[k]].cls;
          if (cls == CoreClass::Big && first_big == waiters_.size()) first_big = k;
          if (cls == CoreClass::Little && first_little == waiters_.size()) first_little = k;
        }
        bool little_waiting = first_little < waiters_.size();
        bool big_waiting = first_big < waiters_.size();
        if (little_waiting && (!big_waiting || streak_ >= p.batch)) {
          streak_ = 0;
          return first_little;
        }
        if (little_waiting) ++streak_;
        return first_big;
      }
      default:
        return 0;
    }
  }

  void release(std::uint64_t t) {
    holder_ = -1;
    if (waiters_.empty()) return;
    std::size_t k = pick_waiter();
    unsigned next = waiters_[k];
    waiters_.erase(waiters_.begin() + static_cast<std::ptrdiff_t>(k));
    grant(next, t);
  }

  void fire(unsigned i, std::uint64_t t) {
    Thread& th = threads_[i];
    switch (th.phase) {
      case Phase::holding: {
        ++result_.cs_executed;
        ++result_.per_thread_count[i];
        result_.makespan = t;
        // The run ends with this CS; leave no half-executed one behind.
        if (result_.cs_executed < cfg_.horizon) release(t); else holder_ = -1;
        if (cfg_.policy.kind == PolicyKind::slo_feedback && th.cls == CoreClass::Little) {
          std::uint64_t latency = t - th.request_time;
          WindowUpdate u = th.epochs.record(0, latency, cfg_.policy.slo);
          result_.window_trajectory.push_back({i, latency, th.window_used, u.window, u.unit});
        }
        if (cfg_.non_cs == 0) {
          request(i, t);
        } else {
          th.phase = Phase::idle;
          th.event = t + cfg_.non_cs;
        }
        break;
      }
      case Phase::idle:
        request(i, t);
        break;
      case Phase::standby:
        enqueue(i, t);
        break;
      case Phase::queued:
        break;
    }
  }

  // A free lock is noticed by the lowest-id standby competitor.
  void settle(std::uint64_t t) {
    if (!lock_free()) return;
    for (unsigned i = 0; i < threads_.size(); ++i) {
      if (threads_[i].phase == Phase::standby) {
        enqueue(i, t);
        return;
      }
    }
  }

  void finish() {
    SimResult& r = result_;
    double span = static_cast<double>(std::max<std::uint64_t>(r.makespan, 1));
    r.throughput = static_cast<double>(r.cs_executed) / span;
    r.normalized_throughput = r.throughput * static_cast<double>(cfg_.cs_big);
    r.utilization = static_cast<double>(r.busy_time) / span;

    // Steady state: between the first start past warm-up and the last start
    // of a reference thread (highest-id little that ran twice, else a big),
    // which spans whole cycles of a periodic schedule.
    std::uint64_t warm = static_cast<std::uint64_t>(cfg_.warmup_fraction * static_cast<double>(r.makespan));
    auto span_of = [&](unsigned i) -> std::pair<std::uint64_t, std::uint64_t> {
      auto& s = starts_[i];
      auto it = std::lower_bound(s.begin(), s.end(), warm);
      if (it == s.end() || std::next(it) == s.end()) return {0, 0};
      return {*it, s.back()};
    };
    std::pair<std::uint64_t, std::uint64_t> ref{0, 0};
    for (unsigned i = static_cast<unsigned>(threads_.size()); i-- > 0;) {
      if (threads_[i].cls != CoreClass::Little) continue;
      ref = span_of(i);
      if (ref.second > ref.first) break;
    }
    if (ref.second <= ref.first) {
      for (unsigned i = cfg_.n_big; i-- > 0;) {
        ref = span_of(i);
        if (ref.second > ref.first) break;
      }
    }
    if (ref.second > ref.first) {
      auto lo = std::lower_bound(all_starts_.begin(), all_starts_.end(), ref.first);
      auto hi = std::lower_bound(all_starts_.begin(), all_starts_.end(), ref.second);
      double count = static_cast<double>(hi - lo);
      r.steady_normalized_throughput =
          count * static_cast<double>(cfg_.cs_big) / static_cast<double>(ref.second - ref.first);
    } else {
      r.steady_normalized_throughput = r.normalized_throughput;
    }

    for (int c = 0; c < 2; ++c) {
      ClassStats& s = c == 0 ? r.big : r.little;
      auto& w = waits_[c];
      s.acquisitions = w.size();
      if (w.empty()) continue;
      double sum = 0.0;
      for (auto x : w) sum += static_cast<double>(x);
      s.mean_wait = sum / static_cast<double>(w.size());
      s.max_wait = *std::max_element(w.begin(), w.end());
      s.p99_wait = nearest_rank(w, 99.0);
    }
  }

  SimConfig cfg_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::vector<Thread> threads_;
  std::deque<unsigned> waiters_;
  int holder_ = -1;
  unsigned streak_ = 0;
  std::vector<std::uint64_t> waits_[2];
  std::vector<std::vector<std::uint64_t>> starts_;
  std::vector<std::uint64_t> all_starts_;
  SimResult result_;
};

}  // namespace detail

inline SimResult simulate(const SimConfig& cfg) { return detail::Simulator(cfg).run(); }

// ---------------------------------------------------------------------------
// Feedback loop against a step latency model: an epoch violates its SLO
// exactly when it ran with a window above `critical_window`.

struct StepLatencyModel {
  std::uint64_t slo = 1'000'000;
  std::uint64_t critical_window = 500'000;
  SloConfig feedback{99, 100, 100'000'000};
  std::uint64_t epochs = 100'000;
};

struct FeedbackRun {
  std::uint64_t violations = 0;
  std::uint64_t epochs = 0;
  std::vector<std::uint64_t> windows;  // window used by each epoch
  double violation_rate() const {
    return epochs ? static_cast<double>(violations) / static_cast<double>(epochs) : 0.0;
  }
};

inline FeedbackRun run_step_feedback(const StepLatencyModel& m) {
  m.feedback.validate();
  EpochTable table(1, m.feedback);
  FeedbackRun run;
  run.windows.reserve(m.epochs);
  for (std::uint64_t e = 0; e < m.epochs; ++e) {
    std::uint64_t w = table.state(0).window;
    run.windows.push_back(w);
    bool violated = w > m.critical_window;
    run.violations += violated;
    table.record(0, violated ? m.slo + 1 : m.slo, m.slo);
  }
  run.epochs = m.epochs;
  return run;
}

inline double steady_state_violation_rate(const StepLatencyModel& m) {
  return run_step_feedback(m).violation_rate();
}

inline std::string to_string(const Policy& p) {
  switch (p.kind) {
    case PolicyKind::fifo: return "fifo";
    case PolicyKind::tas_affinity:
      return p.favored == CoreClass::Big ? "tas-big" : "tas-little";
    case PolicyKind::proportional: return "proportional:" + std::to_string(p.batch);
    case PolicyKind::window:
      return p.window == kInfiniteWindow ? "window:inf" : "window:" + std::to_string(p.window);
    case PolicyKind::slo_feedback: return "slo:" + std::to_string(p.slo);
  }
  return "?";
}

}  // namespace asl::model
