#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "asl/harness/bench.hpp"

namespace asl::harness {

// --- variable load -----------------------------------------------------------

/// x1, x128, x1, random up to x128, x1024. `scale` stretches every phase.
inline std::vector<LoadPhase> default_variable_phases(double scale = 1.0) {
  return {{1.0 * scale, 1, false},
          {3.0 * scale, 128, false},
          {1.0 * scale, 1, false},
          {2.0 * scale, 128, true},
          {3.0 * scale, 1024, false}};
}

struct PhaseStat {
  LoadPhase phase;
  double start_s = 0;
  double end_s = 0;
  std::uint64_t count = 0;
  std::uint64_t p99_ns = 0;             // whole phase
  std::uint64_t p99_last_third_ns = 0;  // settled part of the phase
  double violation_fraction = 0;
};

struct SeriesPoint {
  double t_s = 0;
  CoreClass cls = CoreClass::Big;
  std::uint32_t latency_ns = 0;
  std::uint32_t window_ns = 0;
};

struct VariableLoadResult {
  BenchReport report;
  std::vector<PhaseStat> phases;
  std::vector<SeriesPoint> series;
};

inline VariableLoadResult scenario_variable_load(BenchConfig cfg) {
  if (cfg.phases.empty()) cfg.phases = default_variable_phases();
  cfg.scenario = "variable_load";
  cfg.keep_samples = true;
  RunOutput run = run_with_lock(cfg, emulated_body(cfg));

  VariableLoadResult out;
  out.report = build_report(cfg, run, 0, run.elapsed_ns);
  double acc = 0;
  for (std::size_t i = 0; i < cfg.phases.size(); ++i) {
    PhaseStat st;
    st.phase = cfg.phases[i];
    st.start_s = acc;
    acc += cfg.phases[i].duration_s;
    st.end_s = acc;
    const auto lo = static_cast<std::uint64_t>(st.start_s * 1e9);
    const auto hi = static_cast<std::uint64_t>(st.end_s * 1e9);
    const auto settled = lo + (hi - lo) * 2 / 3;
    LatencyRecorder all, last;
    for (auto& w : run.workers) {
      for (auto& s : w.samples) {
        if (s.phase != i) continue;
        all.add(w.cls, s.latency_ns);
        if (s.end_ns >= settled && s.end_ns < hi) last.add(w.cls, s.latency_ns);
      }
    }
    st.count = all.count();
    if (all.count()) st.p99_ns = all.percentile(99);
    if (last.count()) st.p99_last_third_ns = last.percentile(99);
    if (cfg.slo_ns) st.violation_fraction = all.fraction_above(*cfg.slo_ns);
    out.phases.push_back(st);
  }
  for (auto& w : run.workers) {
    for (auto& s : w.samples) {
      out.series.push_back({static_cast<double>(s.end_ns) * 1e-9, w.cls, s.latency_ns, s.window_ns});
    }
  }
  std::sort(out.series.begin(), out.series.end(),
            [](const SeriesPoint& a, const SeriesPoint& b) { return a.t_s < b.t_s; });
  return out;
}

// --- contention sweep ----------------------------------------------------------

struct ContentionPoint {
  std::uint64_t non_cs_ns = 0;
  BenchReport asl;
  BenchReport mcs;
  BenchReport big_only;  // MCS with the little threads removed
  double speedup_vs_mcs = 0;
  double speedup_vs_big_only = 0;
};

/// `cfg` describes the ASL run; each point overrides non_cs_ns.
inline std::vector<ContentionPoint> scenario_contention_sweep(BenchConfig cfg,
                                                              const std::vector<std::uint64_t>& non_cs) {
  cfg.scenario = "contention_sweep";
  std::vector<ContentionPoint> out;
  for (auto n : non_cs) {
    ContentionPoint p;
    p.non_cs_ns = n;
    BenchConfig a = cfg;
    a.lock = LockKind::asl;
    a.non_cs_ns = n;
    p.asl = run_scenario(a);
    BenchConfig m = a;
    m.lock = LockKind::mcs;
    p.mcs = run_scenario(m);
    BenchConfig b = m;
    b.n_little = 0;
    if (b.n_big == 0) b.n_big = 1;
    p.big_only = run_scenario(b);
    p.speedup_vs_mcs = p.mcs.throughput > 0 ? p.asl.throughput / p.mcs.throughput : 0;
    p.speedup_vs_big_only = p.big_only.throughput > 0 ? p.asl.throughput / p.big_only.throughput : 0;
    out.push_back(std::move(p));
  }
  return out;
}

// --- mixed lengths -------------------------------------------------------------

/// Epochs of length L or `long_factor`*L, the long ones with probability
/// `long_ratio`. Each length is its own epoch id, so it gets its own window.
inline BenchReport scenario_mixed_lengths(BenchConfig cfg, double long_ratio, double long_factor = 100) {
  cfg.scenario = "mixed_lengths";
  if (long_ratio <= 0) {
    cfg.mix = {{1.0, 1.0}};
  } else if (long_ratio >= 1) {
    cfg.mix = {{long_factor, 1.0}};
  } else {
    cfg.mix = {{1.0, 1.0 - long_ratio}, {long_factor, long_ratio}};
  }
  return run_scenario(cfg);
}

// --- oversubscription ---------------------------------------------------------

/// Two threads per emulated core. ASL runs with sleep standby over an OS
/// mutex unless the caller pinned down `standby` / `inner` explicitly.
inline BenchReport scenario_oversubscription(BenchConfig cfg) {
  cfg.scenario = "oversubscription";
  if (cfg.oversubscription < 2) cfg.oversubscription = 2;
  if (cfg.lock == LockKind::asl && cfg.standby == StandbyChoice::automatic) {
    cfg.standby = StandbyChoice::sleep;
    cfg.inner = InnerKind::mutex;
  }
  return run_scenario(cfg);
}

// --- data structures ---------------------------------------------------------

enum class DataStructure { stack, list };

inline std::string to_string(DataStructure d) { return d == DataStructure::stack ? "stack" : "list"; }

struct DataStructureResult {
  BenchReport report;
  std::uint64_t inserts = 0;  // successful pushes / list inserts
  std::uint64_t removes = 0;  // successful pops / list removes
  std::uint64_t initial_size = 0;
  std::uint64_t final_size = 0;
  bool conserved = false;
  bool ordered = true;  // list only: keys strictly ascending at the end
};

namespace detail {

class SortedList {
 public:
  struct Node {
    std::uint64_t key;
    Node* next;
  };

  ~SortedList() {
    while (head_) {
      Node* n = head_;
      head_ = n->next;
      delete n;
    }
  }

  bool insert(std::uint64_t key) {
    Node** link = &head_;
    while (*link && (*link)->key < key) link = &(*link)->next;
    if (*link && (*link)->key == key) return false;
    *link = new Node{key, *link};
    return true;
  }

  bool remove(std::uint64_t key) {
    Node** link = &head_;
    while (*link && (*link)->key < key) link = &(*link)->next;
    if (!*link || (*link)->key != key) return false;
    Node* dead = *link;
    *link = dead->next;
    delete dead;
    return true;
  }

  std::uint64_t size() const {
    std::uint64_t n = 0;
    for (Node* p = head_; p; p = p->next) ++n;
    return n;
  }

  bool ordered() const {
    for (Node* p = head_; p && p->next; p = p->next) {
      if (p->key >= p->next->key) return false;
    }
    return true;
  }

 private:
  Node* head_ = nullptr;
};

struct alignas(64) OpCounters {
  std::uint64_t inserts = 0;
  std::uint64_t removes = 0;
};

}  // namespace detail

/// Threads push or pop (or insert or remove a random key) fifty-fifty.
/// `cs_base_ns` of emulated work is added to every operation so the little
/// threads stay slower inside the lock.
inline DataStructureResult scenario_data_structures(BenchConfig cfg, DataStructure kind,
                                                    std::uint64_t key_range = 512) {
  cfg.scenario = "ds_" + to_string(kind);
  std::vector<std::uint64_t> stack;
  detail::SortedList list;
  DataStructureResult out;
  {
    std::mt19937_64 rng(cfg.seed);
    for (std::uint64_t i = 0; i < key_range / 2; ++i) {
      if (kind == DataStructure::stack) {
        stack.push_back(i);
      } else {
        list.insert(rng() % key_range);
      }
    }
    out.initial_size = kind == DataStructure::stack ? stack.size() : list.size();
  }
  stack.reserve(1 << 20);
  std::vector<detail::OpCounters> counters(cfg.threads());

  auto body = [&](unsigned w, CoreClass cls, double, std::mt19937_64& rng) {
    std::uint64_t r = rng();
    bool insert = (r & 1) == 0;
    if (kind == DataStructure::stack) {
      if (insert) {
        stack.push_back(r >> 1);
        ++counters[w].inserts;
      } else if (!stack.empty()) {
        stack.pop_back();
        ++counters[w].removes;
      }
    } else {
      std::uint64_t key = (r >> 1) % key_range;
      if (insert ? list.insert(key) : list.remove(key)) ++(insert ? counters[w].inserts : counters[w].removes);
    }
    if (cfg.cs_base_ns) emulated_work(cfg.cs_base_ns, cls, cfg.profile);
  };

  RunOutput run = run_with_lock(cfg, body);
  out.report = build_report(cfg, run);
  for (auto& c : counters) {
    out.inserts += c.inserts;
    out.removes += c.removes;
  }
  out.final_size = kind == DataStructure::stack ? stack.size() : list.size();
  out.conserved = out.initial_size + out.inserts - out.removes == out.final_size;
  if (kind == DataStructure::list) out.ordered = list.ordered();
  return out;
}

// --- SLO sweep -------------------------------------------------------------------

inline std::vector<BenchReport> sweep_slo(BenchConfig cfg, const std::vector<std::uint64_t>& slos) {
  cfg.lock = LockKind::asl;
  cfg.scenario = "slo_sweep";
  std::vector<BenchReport> out;
  for (auto s : slos) {
    cfg.slo_ns = s;
    out.push_back(run_scenario(cfg));
  }
  return out;
}

}  // namespace asl::harness
