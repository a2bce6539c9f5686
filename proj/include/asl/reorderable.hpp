#pragma once

// Reorderable lock: bounded reordering exposed as a per-acquisition time
// window on top of an unmodified FIFO lock.
//
// A caller with a window becomes a "standby competitor" while the lock is
// busy. It polls the lock with a doubling iteration schedule and enqueues on
// the inner lock as soon as it sees the lock free or its window expires, so
// every path ends in the inner lock's own acquire within window + one poll.

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <time.h>
#include <vector>

#include "asl/locks.hpp"
#include "asl/platform.hpp"
#include "asl/spin.hpp"

namespace asl {

enum class StandbyMode { spin, sleep };
enum class StandbyResult { observed_free, expired };

struct ReorderOptions {
  std::uint64_t threshold_ns = 200;
  std::uint64_t max_window_ns = 100'000'000;
  StandbyMode standby = StandbyMode::spin;
  std::uint64_t sleep_ns = 20'000;  // per standby iteration in sleep mode
  // Sleep mode spins instead once less than this is left in the window.
  std::uint64_t sleep_floor_ns = 0;

  void validate() const {
    if (threshold_ns == 0) throw std::invalid_argument("threshold_ns must be > 0");
    if (max_window_ns < threshold_ns) {
      throw std::invalid_argument("max_window_ns must be >= threshold_ns");
    }
    if (standby == StandbyMode::sleep && sleep_ns == 0) {
      throw std::invalid_argument("sleep_ns must be > 0 in sleep standby");
    }
  }
};

// Filled by standby_wait / lock_reorder when a trace pointer is supplied.
struct StandbyWaitTrace {
  std::vector<std::uint64_t> poll_counters;  // iteration counter value at each poll
  std::vector<std::uint64_t> poll_ns;
  std::uint64_t start_ns = 0;
  std::uint64_t window_end_ns = 0;
  std::uint64_t enqueue_ns = 0;
  std::uint64_t iterations = 0;
  bool stood_by = false;
  StandbyResult result = StandbyResult::expired;

  void clear() { *this = StandbyWaitTrace{}; }
};

namespace detail {

inline void sleep_for_ns(std::uint64_t ns) noexcept {
  timespec ts{static_cast<time_t>(ns / 1'000'000'000), static_cast<long>(ns % 1'000'000'000)};
  nanosleep(&ts, nullptr);
}

}  // namespace detail

template <NodeLock Inner>
class ReorderableLock {
 public:
  using Node = typename Inner::Node;
  using inner_type = Inner;

  explicit ReorderableLock(ReorderOptions opts = {}) : opts_(opts) { opts_.validate(); }
  ReorderableLock(const ReorderableLock&) = delete;
  ReorderableLock& operator=(const ReorderableLock&) = delete;

  void lock_immediately(Node& node) { inner_.lock(node); }

  void lock_reorder(Node& node, std::uint64_t window_ns, StandbyWaitTrace* trace = nullptr) {
    if (window_ns < opts_.threshold_ns || inner_.is_free()) {
      if (trace) trace->enqueue_ns = now_ns();
      inner_.lock(node);
      return;
    }
    std::uint64_t start = now_ns();
    standby_wait(start + window_ns, trace, start);
    if (trace) trace->enqueue_ns = now_ns();
    inner_.lock(node);
  }

  void lock_eventually(Node& node, StandbyWaitTrace* trace = nullptr) {
    lock_reorder(node, opts_.max_window_ns, trace);
  }

  bool try_lock(Node& node) { return inner_.try_lock(node); }

  void unlock(Node& node) { inner_.unlock(node); }

  bool is_free() const noexcept { return inner_.is_free(); }

  /// Waits until a poll sees the lock free or `window_end` passes. Polls
  /// happen when the iteration counter hits 1, 2, 4, 8, ...; expiry is
  /// checked against the clock every iteration.
  StandbyResult standby_wait(std::uint64_t window_end, StandbyWaitTrace* trace = nullptr,
                             std::uint64_t start = 0) {
    if (trace) {
      trace->stood_by = true;
      trace->start_ns = start ? start : now_ns();
      trace->window_end_ns = window_end;
    }
    std::uint64_t cnt = 0;
    std::uint64_t next_check = 1;
    StandbyResult result = StandbyResult::expired;
    SpinWait spin;
    std::uint64_t now;
    while ((now = now_ns()) < window_end) {
      if (cnt++ == next_check) {
        if (trace) {
          trace->poll_counters.push_back(next_check);
          trace->poll_ns.push_back(now);
        }
        if (inner_.is_free()) {
          result = StandbyResult::observed_free;
          break;
        }
        next_check <<= 1;
      }
      std::uint64_t left = window_end - now;
      if (opts_.standby == StandbyMode::sleep && left >= opts_.sleep_floor_ns) {
        // Iterations up to the next poll only sleep, so they are merged into
        // one nanosleep; the poll schedule is unchanged.
        std::uint64_t steps = next_check - cnt + 1;
        cnt = next_check;
        detail::sleep_for_ns(steps > left / opts_.sleep_ns ? left : steps * opts_.sleep_ns);
      } else {
        spin.relax();
      }
    }
    if (trace) {
      trace->iterations = cnt;
      trace->result = result;
    }
    return result;
  }

  const ReorderOptions& options() const noexcept { return opts_; }
  Inner& inner() noexcept { return inner_; }
  const Inner& inner() const noexcept { return inner_; }

 private:
  ReorderOptions opts_;
  Inner inner_;
};

}  // namespace asl
