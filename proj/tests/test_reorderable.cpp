#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "asl/reorderable.hpp"
#include "lock_test_util.hpp"

using namespace asl;
using namespace std::chrono_literals;

namespace {

// Allowance for the waiter being descheduled after its window expires.
constexpr std::uint64_t kSchedSlack = 2'000'000;

bool is_doubling(const std::vector<std::uint64_t>& polls) {
  for (std::size_t i = 0; i < polls.size(); ++i) {
    if (polls[i] != (1ull << i)) return false;
  }
  return true;
}

// Holds `lock` from another thread for `hold` and returns once it is held.
template <class L>
std::thread hold_for(L& lock, typename L::Node& node, std::chrono::nanoseconds hold) {
  std::atomic<bool> held{false};
  std::thread t([&lock, &node, &held, hold] {
    lock.lock_immediately(node);
    held = true;
    std::this_thread::sleep_for(hold);
    lock.unlock(node);
  });
  while (!held.load()) std::this_thread::yield();
  return t;
}

}  // namespace

TEST(ReorderOptions, Validation) {
  ReorderOptions o;
  EXPECT_EQ(o.threshold_ns, 200u);
  EXPECT_EQ(o.max_window_ns, 100'000'000u);
  EXPECT_EQ(o.standby, StandbyMode::spin);
  o.threshold_ns = 0;
  EXPECT_THROW(ReorderableLock<QueueLock>{o}, std::invalid_argument);
  o.threshold_ns = 1000;
  o.max_window_ns = 999;
  EXPECT_THROW(ReorderableLock<QueueLock>{o}, std::invalid_argument);
  o = ReorderOptions{};
  o.standby = StandbyMode::sleep;
  o.sleep_ns = 0;
  EXPECT_THROW(ReorderableLock<QueueLock>{o}, std::invalid_argument);
}

TEST(LockImmediately, FreeLockAcquiresAtOnce) {
  ReorderableLock<QueueLock> l;
  QueueNode n;
  l.lock_immediately(n);
  EXPECT_FALSE(l.is_free());
  l.unlock(n);
  EXPECT_TRUE(l.is_free());
}

TEST(LockImmediately, BehindThreeQueuedWaitersAcquiresFourth) {
  ReorderableLock<QueueLock> l;
  QueueNode holder;
  l.lock_immediately(holder);
  std::vector<QueueNode> nodes(4);
  std::vector<int> order;
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i) {
    ts.emplace_back([&, i] {
      l.lock_immediately(nodes[i]);
      order.push_back(i);
      l.unlock(nodes[i]);
    });
    while (l.inner().tail() != &nodes[i]) std::this_thread::yield();
  }
  l.unlock(holder);
  for (auto& t : ts) t.join();
  ASSERT_EQ(order.size(), 4u);
  EXPECT_EQ(order[3], 3);
}

TEST(LockImmediately, CounterStressExact) {
  ReorderableLock<QueueLock> l;
  EXPECT_EQ(testutil::run_counter(l, 8, 10'000), 80'000u);
}

TEST(LockReorder, ZeroWindowOnContendedLockEnqueuesImmediately) {
  ReorderableLock<QueueLock> l;
  QueueNode h, n;
  std::thread t = hold_for(l, h, 5ms);
  StandbyWaitTrace trace;
  std::uint64_t t0 = now_ns();
  std::thread w([&] {
    l.lock_reorder(n, 0, &trace);
    l.unlock(n);
  });
  w.join();
  t.join();
  EXPECT_FALSE(trace.stood_by);
  EXPECT_LT(trace.enqueue_ns - t0, 2'000'000u);
}

TEST(LockReorder, BelowThresholdMatchesLockImmediately) {
  ReorderOptions o;
  o.threshold_ns = 10'000;
  ReorderableLock<QueueLock> l(o);
  QueueNode h, n;
  std::thread t = hold_for(l, h, 3ms);
  StandbyWaitTrace trace;
  std::thread w([&] {
    l.lock_reorder(n, 9'999, &trace);
    l.unlock(n);
  });
  // The waiter must show up in the inner queue right away.
  while (l.inner().tail() != &n) std::this_thread::yield();
  w.join();
  t.join();
  EXPECT_FALSE(trace.stood_by);
  EXPECT_TRUE(trace.poll_counters.empty());
}

TEST(LockReorder, FreeLockAtEntryEnqueuesImmediately) {
  ReorderableLock<QueueLock> l;
  QueueNode n;
  StandbyWaitTrace trace;
  std::uint64_t t0 = now_ns();
  l.lock_reorder(n, 1'000'000, &trace);
  std::uint64_t dt = now_ns() - t0;
  l.unlock(n);
  EXPECT_FALSE(trace.stood_by);
  EXPECT_LT(dt, 500'000u);
}

TEST(LockReorder, BusyLockEnqueuesWhenWindowExpires) {
  ReorderableLock<QueueLock> l;
  QueueNode h, n;
  std::thread t = hold_for(l, h, 4ms);
  StandbyWaitTrace trace;
  l.lock_reorder(n, 1'000'000, &trace);
  l.unlock(n);
  t.join();
  ASSERT_TRUE(trace.stood_by);
  EXPECT_EQ(trace.result, StandbyResult::expired);
  EXPECT_GE(trace.enqueue_ns - trace.start_ns, 1'000'000u);
  EXPECT_LE(trace.enqueue_ns - trace.start_ns, 1'000'000u + kSchedSlack);
  EXPECT_TRUE(is_doubling(trace.poll_counters));
}

TEST(LockReorder, StandbyEndsEarlyWhenLockBecomesFree) {
  ReorderableLock<QueueLock> l;
  QueueNode h, n;
  std::thread t = hold_for(l, h, 2ms);
  StandbyWaitTrace trace;
  l.lock_reorder(n, 50'000'000, &trace);
  l.unlock(n);
  t.join();
  ASSERT_TRUE(trace.stood_by);
  EXPECT_EQ(trace.result, StandbyResult::observed_free);
  EXPECT_LT(trace.enqueue_ns - trace.start_ns, 50'000'000u);
}

TEST(LockEventually, FreeLockIsImmediate) {
  ReorderableLock<QueueLock> l;
  QueueNode n;
  StandbyWaitTrace trace;
  l.lock_eventually(n, &trace);
  l.unlock(n);
  EXPECT_FALSE(trace.stood_by);
}

TEST(LockEventually, EnqueuesByMaxWindowUnderLongContention) {
  ReorderOptions o;
  o.max_window_ns = 5'000'000;
  ReorderableLock<QueueLock> l(o);
  QueueNode h, n;
  std::thread t = hold_for(l, h, 10ms);
  StandbyWaitTrace trace;
  l.lock_eventually(n, &trace);
  l.unlock(n);
  t.join();
  ASSERT_TRUE(trace.stood_by);
  EXPECT_EQ(trace.window_end_ns - trace.start_ns, 5'000'000u);
  EXPECT_GE(trace.enqueue_ns - trace.start_ns, 5'000'000u);
  EXPECT_LE(trace.enqueue_ns - trace.start_ns, 5'000'000u + kSchedSlack);
}

TEST(StandbyWait, FreeAtFirstPollObservesFreeAfterOnePoll) {
  ReorderableLock<QueueLock> l;
  StandbyWaitTrace trace;
  EXPECT_EQ(l.standby_wait(now_ns() + 10'000'000, &trace), StandbyResult::observed_free);
  EXPECT_EQ(trace.poll_counters, (std::vector<std::uint64_t>{1}));
}

TEST(StandbyWait, NeverFreePollsAtPowersOfTwo) {
  ReorderableLock<QueueLock> l;
  QueueNode h;
  l.lock_immediately(h);
  StandbyWaitTrace trace;
  EXPECT_EQ(l.standby_wait(now_ns() + 2'000'000, &trace), StandbyResult::expired);
  l.unlock(h);
  EXPECT_FALSE(trace.poll_counters.empty());
  EXPECT_TRUE(is_doubling(trace.poll_counters));
  EXPECT_LT(trace.poll_counters.back(), 2 * trace.iterations);
}

TEST(StandbyWait, WindowShorterThanFirstPollExpiresWithAtMostOnePoll) {
  ReorderableLock<QueueLock> l;
  QueueNode h;
  l.lock_immediately(h);
  StandbyWaitTrace trace;
  EXPECT_EQ(l.standby_wait(now_ns(), &trace), StandbyResult::expired);
  l.unlock(h);
  EXPECT_LE(trace.poll_counters.size(), 1u);
}

TEST(StandbyWait, SleepModeRespectsWindow) {
  ReorderOptions o;
  o.standby = StandbyMode::sleep;
  o.sleep_ns = 50'000;
  ReorderableLock<MutexLock> l(o);
  MutexLock::Node h, n;
  std::thread t = hold_for(l, h, 5ms);
  StandbyWaitTrace trace;
  l.lock_reorder(n, 1'000'000, &trace);
  l.unlock(n);
  t.join();
  EXPECT_TRUE(is_doubling(trace.poll_counters));
  EXPECT_GE(trace.enqueue_ns - trace.start_ns, 1'000'000u);
  EXPECT_LE(trace.enqueue_ns - trace.start_ns, 1'000'000u + o.sleep_ns + kSchedSlack);
}

TEST(StandbyWait, SleepModeKeepsIterationSchedule) {
  // Each iteration stands for at least one sleep_ns nap, so within 2 ms at
  // 50 us per iteration the counter cannot reach 64: at most six polls.
  ReorderOptions o;
  o.standby = StandbyMode::sleep;
  o.sleep_ns = 50'000;
  ReorderableLock<QueueLock> l(o);
  QueueNode h;
  l.lock_immediately(h);
  StandbyWaitTrace trace;
  std::uint64_t t0 = now_ns();
  EXPECT_EQ(l.standby_wait(t0 + 2'000'000, &trace), StandbyResult::expired);
  std::uint64_t took = now_ns() - t0;
  l.unlock(h);
  EXPECT_TRUE(is_doubling(trace.poll_counters));
  EXPECT_GE(trace.poll_counters.size(), 1u);
  EXPECT_LE(trace.poll_counters.size(), 6u);
  EXPECT_GE(took, 2'000'000u);
  EXPECT_LE(took, 2'000'000u + kSchedSlack);
}

TEST(StandbyWait, SleepFloorSpinsOutTheWindow) {
  ReorderOptions o;
  o.standby = StandbyMode::sleep;
  o.sleep_ns = 50'000;
  o.sleep_floor_ns = 10'000'000;  // more than the window: never sleeps
  ReorderableLock<QueueLock> l(o);
  QueueNode h;
  l.lock_immediately(h);
  StandbyWaitTrace trace;
  EXPECT_EQ(l.standby_wait(now_ns() + 2'000'000, &trace), StandbyResult::expired);
  l.unlock(h);
  EXPECT_TRUE(is_doubling(trace.poll_counters));
  EXPECT_GT(trace.poll_counters.size(), 6u);
}

TEST(Unlock, ReleaseWithoutWaitersLeavesLockFree) {
  ReorderableLock<QueueLock> l;
  QueueNode n;
  l.lock_reorder(n, 0);
  l.unlock(n);
  EXPECT_TRUE(l.is_free());
}

TEST(Unlock, TryLockDoesNotStandBy) {
  ReorderableLock<QueueLock> l;
  QueueNode a, b;
  EXPECT_TRUE(l.try_lock(a));
  EXPECT_FALSE(l.try_lock(b));
  l.unlock(a);
  EXPECT_TRUE(l.try_lock(b));
  l.unlock(b);
}

TEST(Starvation, AcquisitionsBoundedByWindowPlusQueueDrain) {
  // 4 threads, CS up to 100 us, 1 ms window.
  constexpr unsigned kThreads = 4;
  constexpr std::uint64_t kWindow = 1'000'000, kMaxCs = 100'000;
  const std::uint64_t bound = kWindow + kThreads * kMaxCs + 10'000'000;
  ReorderableLock<QueueLock> l;
  std::atomic<std::uint64_t> worst{0};
  std::vector<std::thread> ts;
  for (unsigned i = 0; i < kThreads; ++i) {
    ts.emplace_back([&, i] {
      QueueNode n;
      for (int k = 0; k < 300; ++k) {
        std::uint64_t t0 = now_ns();
        l.lock_reorder(n, kWindow);
        std::uint64_t waited = now_ns() - t0;
        std::uint64_t cs = (k % 10 == 0) ? kMaxCs : 2'000;
        std::uint64_t end = now_ns() + cs;
        while (now_ns() < end) {}
        l.unlock(n);
        std::uint64_t prev = worst.load();
        while (waited > prev && !worst.compare_exchange_weak(prev, waited)) {}
        (void)i;
      }
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_LE(worst.load(), bound);
}
