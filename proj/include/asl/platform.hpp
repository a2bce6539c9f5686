#pragma once

// Clocks, core identification, big/little classification, pinning and the
// calibrated busy-work primitive used to emulate slow cores on symmetric
// hardware.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#include <unistd.h>
#endif

namespace asl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CoreClass : std::uint8_t { Big = 0, Little = 1 };

inline constexpr std::string_view to_string(CoreClass c) noexcept {
  return c == CoreClass::Big ? "big" : "little";
}

inline std::optional<CoreClass> parse_core_class(std::string_view s) noexcept {
  if (s == "big" || s == "Big" || s == "BIG") return CoreClass::Big;
  if (s == "little" || s == "Little" || s == "LITTLE") return CoreClass::Little;
  return std::nullopt;
}

// Monotonic clock in nanoseconds. steady_clock is CLOCK_MONOTONIC on Linux.
inline std::uint64_t now_ns() noexcept {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

inline int current_core_id() noexcept {
#if defined(__linux__)
  return sched_getcpu();
#else
  return -1;
#endif
}

// CPUs this process may run on.
inline std::vector<int> allowed_cores() {
  std::vector<int> cores;
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  if (sched_getaffinity(0, sizeof(set), &set) == 0) {
    for (int i = 0; i < CPU_SETSIZE; ++i) {
      if (CPU_ISSET(i, &set)) cores.push_back(i);
    }
  }
#endif
  if (cores.empty()) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    for (unsigned i = 0; i < n; ++i) cores.push_back(static_cast<int>(i));
  }
  return cores;
}

inline unsigned online_cpu_count() {
  static const unsigned n = static_cast<unsigned>(allowed_cores().size());
  return n;
}

/// Maps core ids to a class. Built from "0-3:big,4-7:little" style specs
/// (environment / config file) or programmatically.
class CoreTypeMap {
 public:
  CoreTypeMap() = default;

  void set(int core, CoreClass cls) { classes_[core] = cls; }

  void set_range(int first, int last, CoreClass cls) {
    for (int c = first; c <= last; ++c) classes_[c] = cls;
  }

  std::optional<CoreClass> lookup(int core) const {
    auto it = classes_.find(core);
    if (it == classes_.end()) return std::nullopt;
    return it->second;
  }

  bool empty() const noexcept { return classes_.empty(); }
  std::size_t size() const noexcept { return classes_.size(); }
  const std::map<int, CoreClass>& entries() const noexcept { return classes_; }

  // Throws ConfigError if any of `cores` has no class.
  void validate_covers(const std::vector<int>& cores) const {
    for (int c : cores) {
      if (!lookup(c)) {
        throw ConfigError("core type map does not cover core " + std::to_string(c));
      }
    }
  }

  static CoreTypeMap parse(std::string_view spec) {
    CoreTypeMap map;
    std::size_t pos = 0;
    while (pos < spec.size()) {
      std::size_t comma = spec.find(',', pos);
      if (comma == std::string_view::npos) comma = spec.size();
      std::string_view item = trim(spec.substr(pos, comma - pos));
      pos = comma + 1;
      if (item.empty()) continue;
      std::size_t colon = item.find(':');
      if (colon == std::string_view::npos) {
        throw ConfigError("core map entry '" + std::string(item) + "' lacks ':class'");
      }
      auto cls = parse_core_class(trim(item.substr(colon + 1)));
      if (!cls) throw ConfigError("unknown core class in '" + std::string(item) + "'");
      std::string_view range = trim(item.substr(0, colon));
      std::size_t dash = range.find('-');
      int first = parse_int(range.substr(0, dash));
      int last = dash == std::string_view::npos ? first : parse_int(range.substr(dash + 1));
      if (first < 0 || last < first) {
        throw ConfigError("bad core range '" + std::string(range) + "'");
      }
      map.set_range(first, last, *cls);
    }
    return map;
  }

  std::string to_spec() const {
    std::string out;
    for (auto& [core, cls] : classes_) {
      if (!out.empty()) out += ',';
      out += std::to_string(core) + ':' + std::string(to_string(cls));
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  }

  static int parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) throw ConfigError("empty core id");
    int v = 0;
    for (char ch : s) {
      if (ch < '0' || ch > '9') throw ConfigError("bad core id '" + std::string(s) + "'");
      v = v * 10 + (ch - '0');
    }
    return v;
  }

  std::map<int, CoreClass> classes_;
};

namespace detail {

inline std::optional<CoreClass>& declared_class_slot() noexcept {
  static thread_local std::optional<CoreClass> slot;
  return slot;
}

inline CoreTypeMap& global_core_map() {
  static CoreTypeMap map;
  return map;
}

}  // namespace detail

// Emulation mode: the calling thread is treated as `cls` wherever it runs.
inline void declare_thread_class(CoreClass cls) noexcept { detail::declared_class_slot() = cls; }
inline void clear_thread_class() noexcept { detail::declared_class_slot().reset(); }
inline std::optional<CoreClass> declared_thread_class() noexcept {
  return detail::declared_class_slot();
}

/// Installs the process-wide map. Must happen before workers launch; an
/// allowed core without a class is rejected here rather than at lookup.
inline void install_core_map(CoreTypeMap map) {
  map.validate_covers(allowed_cores());
  detail::global_core_map() = std::move(map);
}

inline void reset_core_map() { detail::global_core_map() = CoreTypeMap{}; }

inline const CoreTypeMap& installed_core_map() { return detail::global_core_map(); }

inline CoreClass classify_current_core(const CoreTypeMap& map) noexcept {
  if (auto declared = detail::declared_class_slot()) return *declared;
  if (map.empty()) return CoreClass::Big;
  return map.lookup(current_core_id()).value_or(CoreClass::Big);
}

// Read on every call: a migrated thread is reclassified on its next lock.
inline CoreClass current_core_class() noexcept {
  return classify_current_core(detail::global_core_map());
}

inline bool is_big_core() noexcept { return current_core_class() == CoreClass::Big; }

enum class PinStatus { pinned, unsupported, failed };

inline PinStatus pin_thread(int core) {
#if defined(__linux__)
  long configured = sysconf(_SC_NPROCESSORS_CONF);
  if (core < 0 || core >= CPU_SETSIZE || (configured > 0 && core >= configured)) {
    return PinStatus::failed;
  }
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core, &set);
  if (pthread_setaffinity_np(pthread_self(), sizeof(set), &set) != 0) {
    return PinStatus::failed;
  }
  // The affinity change takes effect at the next scheduling point.
  sched_yield();
  return PinStatus::pinned;
#else
  (void)core;
  return PinStatus::unsupported;
#endif
}

// ---------------------------------------------------------------------------
// Asymmetry emulation

struct EmulationProfile {
  double inflation = 4.7;          // little cores run work this many times longer
  double iterations_per_ns = 0.0;  // spin-work calibration
};

inline void spin_iterations(std::uint64_t n) noexcept {
  for (std::uint64_t i = 0; i < n; ++i) {
    asm volatile("" ::: "memory");
  }
}

inline std::uint64_t iterations_for(double ns, const EmulationProfile& p) noexcept {
  double iters = ns * p.iterations_per_ns;
  return iters <= 0.0 ? 0 : static_cast<std::uint64_t>(iters + 0.5);
}

inline void calibrated_delay(std::uint64_t ns, const EmulationProfile& p) noexcept {
  spin_iterations(iterations_for(static_cast<double>(ns), p));
}

/// Busy-executes ~base_ns on a big core and ~inflation*base_ns on a little one.
/// Only work routed through here is inflated; the lock path itself is not.
inline void emulated_work(std::uint64_t base_ns, CoreClass cls, const EmulationProfile& p) noexcept {
  double ns = static_cast<double>(base_ns);
  if (cls == CoreClass::Little) ns *= p.inflation;
  spin_iterations(iterations_for(ns, p));
}

struct CalibrationReport {
  EmulationProfile profile;
  double spread = 0.0;                // (max-min)/median over trimmed trials
  std::uint64_t check_target_ns = 0;  // self-check delay
  std::uint64_t check_measured_ns = 0;
};

namespace detail {

inline std::uint64_t median_of(std::vector<std::uint64_t> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

inline std::uint64_t timed_iterations(std::uint64_t iters) {
  std::uint64_t t0 = now_ns();
  spin_iterations(iters);
  return now_ns() - t0;
}

}  // namespace detail

/// Throws CalibrationError unless a `target_ns` delay lands in [0.9, 1.5]x
/// of the target (median of several trials, so one preemption does not fail it).
inline std::uint64_t verify_profile(const EmulationProfile& p, std::uint64_t target_ns = 100'000) {
  if (!(p.iterations_per_ns > 0.0)) {
    throw CalibrationError("emulation profile has no calibrated iteration rate");
  }
  if (!(p.inflation >= 1.0)) throw CalibrationError("inflation factor must be >= 1");
  std::vector<std::uint64_t> runs;
  for (int i = 0; i < 7; ++i) {
    std::uint64_t t0 = now_ns();
    calibrated_delay(target_ns, p);
    runs.push_back(now_ns() - t0);
  }
  std::uint64_t measured = detail::median_of(runs);
  double ratio = static_cast<double>(measured) / static_cast<double>(target_ns);
  if (ratio < 0.9 || ratio > 1.5) {
    throw CalibrationError("calibrated " + std::to_string(target_ns) + " ns delay took " +
                           std::to_string(measured) + " ns");
  }
  return measured;
}

inline CalibrationReport calibrate_delay(double inflation = 4.7) {
  if (!(inflation >= 1.0)) throw CalibrationError("inflation factor must be >= 1");
  // Probes of roughly 100 us, the scale of the emulated work itself. Longer
  // probes pick up hypervisor steal time on shared hosts.
  std::uint64_t iters = 1 << 10;
  while (detail::timed_iterations(iters) < 100'000 && iters < (1ull << 40)) iters <<= 1;

  std::vector<double> rates;
  for (int i = 0; i < 21; ++i) {
    std::uint64_t ns = detail::timed_iterations(iters);
    rates.push_back(static_cast<double>(iters) / static_cast<double>(std::max<std::uint64_t>(ns, 1)));
  }
  std::sort(rates.begin(), rates.end());
  // Trim the slowest quarter and the fastest trial (preemption outliers).
  std::vector<double> kept(rates.begin() + 5, rates.end() - 1);
  double median = kept[kept.size() / 2];
  double spread = (kept.back() - kept.front()) / median;
  if (spread > 0.5) {
    throw CalibrationError("calibration variance " + std::to_string(spread * 100) + "% exceeds 50%");
  }
  CalibrationReport report;
  report.profile.inflation = inflation;
  report.profile.iterations_per_ns = median;
  report.spread = spread;
  report.check_target_ns = 100'000;
  report.check_measured_ns = verify_profile(report.profile, report.check_target_ns);
  return report;
}

/// Reruns calibrate_delay() up to `attempts` times; rethrows the last error.
/// A startup preemption or frequency step should not abort a whole run.
inline CalibrationReport calibrate_with_retry(double inflation = 4.7, int attempts = 3) {
  for (int i = 1;; ++i) {
    try {
      return calibrate_delay(inflation);
    } catch (const CalibrationError&) {
      if (i >= attempts || !(inflation >= 1.0)) throw;
    }
  }
}

inline void log_calibration(const CalibrationReport& r, std::FILE* out = stderr) {
  std::fprintf(out,
               "asl: calibrated %.4f iterations/ns (spread %.1f%%), %llu ns check took %llu ns, "
               "inflation %.2f, %u cpu(s)\n",
               r.profile.iterations_per_ns, r.spread * 100.0,
               static_cast<unsigned long long>(r.check_target_ns),
               static_cast<unsigned long long>(r.check_measured_ns), r.profile.inflation,
               online_cpu_count());
}

}  // namespace asl
