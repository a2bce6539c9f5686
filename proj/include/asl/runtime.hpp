#pragma once

// SLO feedback layer: per-thread epoch bookkeeping, window adaptation and
// class-based dispatch onto a ReorderableLock.
//
//   auto id = asl::next_epoch_id();
//   asl::epoch_start(id);
//   asl::asl_lock(mutex, node);
//   ...
//   asl::asl_unlock(mutex, node);
//   asl::epoch_end(id, 50'000);   // this epoch should finish within 50 us
//
// Big-core callers always enqueue immediately. Little-core callers inside an
// epoch stand by for that epoch's window; outside any epoch they use the
// maximum window. Only epoch_end on a little core changes a window: a
// violation halves it, a success grows it by `unit`.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "asl/platform.hpp"
#include "asl/reorderable.hpp"

namespace asl {

enum class Status { ok, range_error, state_error };

inline constexpr const char* to_string(Status s) noexcept {
  switch (s) {
    case Status::ok: return "ok";
    case Status::range_error: return "range_error";
    case Status::state_error: return "state_error";
  }
  return "?";
}

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SloConfig {
  int pct = 99;
  std::uint64_t min_unit_ns = 100;
  std::uint64_t max_window_ns = 100'000'000;

  void validate() const {
    if (pct < 1 || pct > 99) throw ConfigError("pct must be in [1, 99]");
    if (min_unit_ns == 0) throw ConfigError("min_unit_ns must be > 0");
  }
};

struct EpochState {
  std::uint64_t window = 0;  // reorder window, ns
  std::uint64_t start = 0;   // epoch begin timestamp, 0 when closed
  std::uint64_t unit = 0;    // linear growth step, 0 until the first epoch_end
};
static_assert(sizeof(EpochState) == 24);

struct WindowUpdate {
  std::uint64_t window;
  std::uint64_t unit;
  friend bool operator==(const WindowUpdate&, const WindowUpdate&) = default;
};

/// Linear growth on success, halving on violation. After a violation the
/// step becomes (100-pct)% of the halved window, floored at min_unit, so the
/// window needs about 100/(100-pct) successes to climb back.
constexpr WindowUpdate adjust_window(std::uint64_t window, std::uint64_t unit,
                                     std::uint64_t latency, std::uint64_t slo,
                                     const SloConfig& cfg) noexcept {
  if (latency > slo) {
    std::uint64_t w = window >> 1;
    std::uint64_t step = w * static_cast<std::uint64_t>(100 - cfg.pct) / 100;
    return {w, step > cfg.min_unit_ns ? step : cfg.min_unit_ns};
  }
  std::uint64_t w = window + unit;
  if (w > cfg.max_window_ns || w < window) w = cfg.max_window_ns;
  return {w, unit};
}

// Growth step used before an epoch has ever been adjusted.
constexpr std::uint64_t initial_unit(std::uint64_t slo, const SloConfig& cfg) noexcept {
  std::uint64_t step = slo / 100 * static_cast<std::uint64_t>(100 - cfg.pct) +
                       slo % 100 * static_cast<std::uint64_t>(100 - cfg.pct) / 100;
  return std::max(step, cfg.min_unit_ns);
}

/// One thread's epochs. Plain value type; the runtime keeps one per thread.
class EpochTable {
 public:
  explicit EpochTable(std::size_t capacity = 64, SloConfig cfg = {})
      : epochs_(capacity), cfg_(cfg) {}

  Status start(int id, std::uint64_t now) noexcept {
    if (id < 0 || static_cast<std::size_t>(id) >= epochs_.size()) return Status::range_error;
    if (current_ >= 0) return Status::state_error;
    current_ = id;
    epochs_[static_cast<std::size_t>(id)].start = now;
    return Status::ok;
  }

  Status end(int id, std::uint64_t required_latency, std::uint64_t now, CoreClass cls) noexcept {
    if (id < 0 || id != current_) return Status::state_error;
    EpochState& e = epochs_[static_cast<std::size_t>(id)];
    if (cls == CoreClass::Little) {
      std::uint64_t latency = now >= e.start ? now - e.start : 0;
      apply(e, latency, required_latency);
    }
    e.start = 0;
    current_ = -1;
    return Status::ok;
  }

  // Feeds one observed latency into epoch `id` without clock reads.
  WindowUpdate record(int id, std::uint64_t latency, std::uint64_t required_latency) {
    EpochState& e = epochs_.at(static_cast<std::size_t>(id));
    apply(e, latency, required_latency);
    return {e.window, e.unit};
  }

  int current() const noexcept { return current_; }
  const EpochState& state(int id) const { return epochs_.at(static_cast<std::size_t>(id)); }
  std::uint64_t current_window() const noexcept {
    return current_ < 0 ? cfg_.max_window_ns : epochs_[static_cast<std::size_t>(current_)].window;
  }
  std::size_t capacity() const noexcept { return epochs_.size(); }
  const SloConfig& config() const noexcept { return cfg_; }

 private:
  void apply(EpochState& e, std::uint64_t latency, std::uint64_t slo) noexcept {
    if (e.unit == 0) e.unit = initial_unit(slo, cfg_);
    WindowUpdate u = adjust_window(e.window, e.unit, latency, slo, cfg_);
    e.window = u.window;
    e.unit = u.unit;
  }

  std::vector<EpochState> epochs_;
  int current_ = -1;
  SloConfig cfg_;
};

/// Hands out process-unique epoch ids 0, 1, 2, ... up to capacity.
class EpochIdAllocator {
 public:
  explicit EpochIdAllocator(int capacity) : capacity_(capacity) {}

  int next() {
    int id = next_.fetch_add(1, std::memory_order_relaxed);
    if (id >= capacity_) {
      next_.store(capacity_, std::memory_order_relaxed);
      throw CapacityError("epoch ids exhausted (capacity " + std::to_string(capacity_) + ")");
    }
    return id;
  }

  int capacity() const noexcept { return capacity_; }

  // Not safe against concurrent next().
  void reset(int capacity) noexcept {
    capacity_ = capacity;
    next_.store(0, std::memory_order_relaxed);
  }

 private:
  std::atomic<int> next_{0};
  int capacity_;
};

// ---------------------------------------------------------------------------
// Process-wide runtime

struct RuntimeConfig {
  SloConfig slo;
  std::uint64_t threshold_ns = 200;
  int max_epochs = 64;

  ReorderOptions reorder_options() const {
    ReorderOptions o;
    o.threshold_ns = threshold_ns;
    o.max_window_ns = slo.max_window_ns;
    return o;
  }

  void validate() const {
    slo.validate();
    if (max_epochs <= 0) throw ConfigError("max_epochs must be > 0");
    if (threshold_ns == 0) throw ConfigError("threshold_ns must be > 0");
    if (slo.max_window_ns < threshold_ns) throw ConfigError("max_window_ns must be >= threshold_ns");
  }
};

namespace detail {

struct RuntimeState {
  RuntimeConfig config;
  std::atomic<std::uint64_t> generation{0};
  EpochIdAllocator ids{64};
};

inline RuntimeState& runtime_state() {
  static RuntimeState s;
  return s;
}

struct ThreadEpochs {
  std::uint64_t generation = ~0ull;
  EpochTable table;
};

inline ThreadEpochs& thread_epochs_slot() {
  static thread_local ThreadEpochs t;
  return t;
}

}  // namespace detail

inline const RuntimeConfig& runtime_config() { return detail::runtime_state().config; }

/// Replaces the process configuration. Call before worker threads start;
/// it also restarts epoch-id allocation.
inline void configure(const RuntimeConfig& cfg) {
  cfg.validate();
  auto& s = detail::runtime_state();
  s.config = cfg;
  s.ids.reset(cfg.max_epochs);
  s.generation.fetch_add(1, std::memory_order_release);
}

/// The calling thread's table, (re)created if the runtime was reconfigured.
inline EpochTable& this_thread_epochs() {
  auto& t = detail::thread_epochs_slot();
  auto& s = detail::runtime_state();
  std::uint64_t gen = s.generation.load(std::memory_order_acquire);
  if (t.generation != gen) {
    t.table = EpochTable(static_cast<std::size_t>(s.config.max_epochs), s.config.slo);
    t.generation = gen;
  }
  return t.table;
}

inline int next_epoch_id() { return detail::runtime_state().ids.next(); }

inline Status epoch_start(int id) { return this_thread_epochs().start(id, now_ns()); }

inline Status epoch_end(int id, std::uint64_t required_latency_ns) {
  CoreClass cls = current_core_class();
  return this_thread_epochs().end(id, required_latency_ns, now_ns(), cls);
}

template <class Inner>
void asl_lock(ReorderableLock<Inner>& mutex, typename Inner::Node& node) {
  if (is_big_core()) return mutex.lock_immediately(node);
  EpochTable& t = this_thread_epochs();
  if (t.current() < 0) return mutex.lock_eventually(node);
  mutex.lock_reorder(node, t.state(t.current()).window);
}

template <class Inner>
bool asl_trylock(ReorderableLock<Inner>& mutex, typename Inner::Node& node) {
  return mutex.try_lock(node);
}

template <class Inner>
void asl_unlock(ReorderableLock<Inner>& mutex, typename Inner::Node& node) {
  mutex.unlock(node);
}

}  // namespace asl
