#pragma once

// Baseline locks. All share the same shape: a caller-provided `Node`
// (empty for locks that need no waiting record), lock/unlock/try_lock and a
// racy `is_free` probe.

#include <atomic>
#include <cassert>
#include <concepts>
#include <cstdint>
#include <mutex>
#include <vector>

#include "asl/platform.hpp"
#include "asl/spin.hpp"

namespace asl {

template <class L>
concept NodeLock = requires(L& l, const L& cl, typename L::Node& n) {
  l.lock(n);
  l.unlock(n);
  { l.try_lock(n) } -> std::same_as<bool>;
  { cl.is_free() } -> std::same_as<bool>;
};

// ---------------------------------------------------------------------------
// MCS queue lock

struct alignas(64) QueueNode {
  std::atomic<QueueNode*> next{nullptr};
  std::atomic<bool> locked{false};
};

class QueueLock {
 public:
  using Node = QueueNode;

  QueueLock() = default;
  QueueLock(const QueueLock&) = delete;
  QueueLock& operator=(const QueueLock&) = delete;

  void lock(Node& node) noexcept {
    node.next.store(nullptr, std::memory_order_relaxed);
    node.locked.store(true, std::memory_order_relaxed);
    Node* prev = tail_.exchange(&node, std::memory_order_acq_rel);
    if (prev != nullptr) {
      prev->next.store(&node, std::memory_order_release);
      SpinWait w;
      while (node.locked.load(std::memory_order_acquire)) w.relax();
    }
    note_holder(&node);
  }

  bool try_lock(Node& node) noexcept {
    node.next.store(nullptr, std::memory_order_relaxed);
    node.locked.store(false, std::memory_order_relaxed);
    Node* expected = nullptr;
    if (!tail_.compare_exchange_strong(expected, &node, std::memory_order_acq_rel,
                                       std::memory_order_relaxed)) {
      return false;
    }
    note_holder(&node);
    return true;
  }

  void unlock(Node& node) noexcept {
    check_holder(&node);
    Node* succ = node.next.load(std::memory_order_acquire);
    if (succ == nullptr) {
      Node* expected = &node;
      if (tail_.compare_exchange_strong(expected, nullptr, std::memory_order_acq_rel,
                                        std::memory_order_relaxed)) {
        return;
      }
      // A successor swapped the tail but has not linked itself yet.
      SpinWait w;
      while ((succ = node.next.load(std::memory_order_acquire)) == nullptr) w.relax();
    }
    succ->locked.store(false, std::memory_order_release);
  }

  bool is_free() const noexcept { return tail_.load(std::memory_order_acquire) == nullptr; }

  // Most recently appended record; instrumentation only.
  const Node* tail() const noexcept { return tail_.load(std::memory_order_acquire); }

 private:
#ifndef NDEBUG
  void note_holder(const Node* n) noexcept { holder_.store(n, std::memory_order_relaxed); }
  void check_holder(const Node* n) noexcept {
    const Node* h = holder_.exchange(nullptr, std::memory_order_relaxed);
    assert(h == n && "QueueLock released by a record that does not hold it");
    (void)h;
  }
  std::atomic<const Node*> holder_{nullptr};
#else
  void note_holder(const Node*) noexcept {}
  void check_holder(const Node*) noexcept {}
#endif

  alignas(64) std::atomic<Node*> tail_{nullptr};
};

// ---------------------------------------------------------------------------
// Test-and-set spinlock (test-and-test-and-set loop). No ordering guarantee.

class TasLock {
 public:
  struct Node {};

  void lock(Node& = dummy()) noexcept {
    SpinWait w;
    while (true) {
      if (!state_.exchange(true, std::memory_order_acquire)) return;
      while (state_.load(std::memory_order_relaxed)) w.relax();
    }
  }

  bool try_lock(Node& = dummy()) noexcept {
    return !state_.load(std::memory_order_relaxed) &&
           !state_.exchange(true, std::memory_order_acquire);
  }

  void unlock(Node& = dummy()) noexcept { state_.store(false, std::memory_order_release); }

  bool is_free() const noexcept { return !state_.load(std::memory_order_acquire); }

 private:
  static Node& dummy() noexcept {
    static thread_local Node n;
    return n;
  }
  alignas(64) std::atomic<bool> state_{false};
};

// ---------------------------------------------------------------------------
// Ticket lock

class TicketLock {
 public:
  struct Node {};

  // Returns the ticket that was served.
  std::uint64_t lock(Node& = dummy()) noexcept {
    std::uint64_t ticket = next_.fetch_add(1, std::memory_order_relaxed);
    SpinWait w;
    while (serving_.load(std::memory_order_acquire) != ticket) w.relax();
    return ticket;
  }

  bool try_lock(Node& = dummy()) noexcept {
    std::uint64_t serving = serving_.load(std::memory_order_acquire);
    std::uint64_t expected = serving;
    return next_.compare_exchange_strong(expected, serving + 1, std::memory_order_acquire,
                                         std::memory_order_relaxed);
  }

  void unlock(Node& = dummy()) noexcept {
    serving_.store(serving_.load(std::memory_order_relaxed) + 1, std::memory_order_release);
  }

  bool is_free() const noexcept {
    return next_.load(std::memory_order_acquire) == serving_.load(std::memory_order_acquire);
  }

  std::uint64_t tickets_issued() const noexcept { return next_.load(std::memory_order_acquire); }
  std::uint64_t now_serving() const noexcept { return serving_.load(std::memory_order_acquire); }

 private:
  static Node& dummy() noexcept {
    static thread_local Node n;
    return n;
  }
  alignas(64) std::atomic<std::uint64_t> next_{0};
  alignas(64) std::atomic<std::uint64_t> serving_{0};
};

// ---------------------------------------------------------------------------
// OS mutex adapter, used as the inner lock for oversubscribed runs.

class MutexLock {
 public:
  struct Node {};

  void lock(Node& = dummy()) {
    mutex_.lock();
    held_.store(true, std::memory_order_relaxed);
  }

  bool try_lock(Node& = dummy()) {
    if (!mutex_.try_lock()) return false;
    held_.store(true, std::memory_order_relaxed);
    return true;
  }

  void unlock(Node& = dummy()) {
    held_.store(false, std::memory_order_relaxed);
    mutex_.unlock();
  }

  bool is_free() const noexcept { return !held_.load(std::memory_order_relaxed); }

 private:
  static Node& dummy() noexcept {
    static thread_local Node n;
    return n;
  }
  std::mutex mutex_;
  std::atomic<bool> held_{false};
};

// ---------------------------------------------------------------------------
// Static proportional policy: two FIFO sub-queues (big, little). While a
// little waiter is queued, at most `batch` big grants go ahead of it.

class ProportionalLock {
 public:
  struct Node {
    std::atomic<bool> granted{false};
    Node* next = nullptr;
    CoreClass cls = CoreClass::Big;
  };

  explicit ProportionalLock(unsigned batch = 10) : batch_(batch == 0 ? 1 : batch) {}
  ProportionalLock(const ProportionalLock&) = delete;
  ProportionalLock& operator=(const ProportionalLock&) = delete;

  void lock(Node& node) noexcept { lock(node, current_core_class()); }

  void lock(Node& node, CoreClass cls) noexcept {
    node.granted.store(false, std::memory_order_relaxed);
    node.next = nullptr;
    node.cls = cls;
    guard_lock();
    if (!held_.load(std::memory_order_relaxed) && big_.empty() && little_.empty()) {
      held_.store(true, std::memory_order_relaxed);
      count_grant(cls);
      guard_.store(false, std::memory_order_release);
      return;
    }
    (cls == CoreClass::Big ? big_ : little_).push(&node);
    guard_.store(false, std::memory_order_release);
    SpinWait w;
    while (!node.granted.load(std::memory_order_acquire)) w.relax();
  }

  bool try_lock(Node& node) noexcept { return try_lock(node, current_core_class()); }

  bool try_lock(Node&, CoreClass cls) noexcept {
    guard_lock();
    bool ok = !held_.load(std::memory_order_relaxed) && big_.empty() && little_.empty();
    if (ok) {
      held_.store(true, std::memory_order_relaxed);
      count_grant(cls);
    }
    guard_.store(false, std::memory_order_release);
    return ok;
  }

  void unlock(Node& = dummy()) noexcept {
    guard_lock();
    Node* next = nullptr;
    bool little_waiting = !little_.empty();
    if (little_waiting && (big_.empty() || streak_ >= batch_)) {
      next = little_.pop();
      streak_ = 0;
    } else if (!big_.empty()) {
      next = big_.pop();
      if (little_waiting) ++streak_;
    }
    if (next == nullptr) {
      held_.store(false, std::memory_order_relaxed);
    } else {
      count_grant(next->cls);
    }
    guard_.store(false, std::memory_order_release);
    if (next != nullptr) next->granted.store(true, std::memory_order_release);
  }

  // held_ is only written under the guard; readers outside it get a racy snapshot.
  bool is_free() const noexcept { return !held_.load(std::memory_order_relaxed); }

  unsigned batch() const noexcept { return batch_; }

  std::size_t queued(CoreClass cls) const noexcept {
    guard_lock();
    std::size_t n = 0;
    for (Node* p = (cls == CoreClass::Big ? big_ : little_).head; p; p = p->next) ++n;
    guard_.store(false, std::memory_order_release);
    return n;
  }
  std::uint64_t grants(CoreClass cls) const noexcept {
    return grants_[static_cast<int>(cls)].load(std::memory_order_relaxed);
  }

 private:
  struct Fifo {
    Node* head = nullptr;
    Node* tail = nullptr;
    bool empty() const noexcept { return head == nullptr; }
    void push(Node* n) noexcept {
      if (tail) tail->next = n; else head = n;
      tail = n;
    }
    Node* pop() noexcept {
      Node* n = head;
      head = n->next;
      if (!head) tail = nullptr;
      return n;
    }
  };

  void guard_lock() const noexcept {
    SpinWait w;
    while (guard_.exchange(true, std::memory_order_acquire)) w.relax();
  }

  void count_grant(CoreClass cls) noexcept {
    grants_[static_cast<int>(cls)].fetch_add(1, std::memory_order_relaxed);
  }

  static Node& dummy() noexcept {
    static thread_local Node n;
    return n;
  }

  const unsigned batch_;
  alignas(64) mutable std::atomic<bool> guard_{false};
  std::atomic<bool> held_{false};
  unsigned streak_ = 0;
  Fifo big_, little_;
  std::atomic<std::uint64_t> grants_[2] = {0, 0};
};

// ---------------------------------------------------------------------------
// Acquisition log used by ordering / affinity tests and reports.

struct AcquisitionRecord {
  std::uint32_t thread = 0;
  CoreClass cls = CoreClass::Big;
  std::uint64_t enqueue_seq = 0;
  std::uint64_t acquire_seq = 0;
  std::uint64_t request_ns = 0;
  std::uint64_t acquire_ns = 0;
};

class LockObserver {
 public:
  explicit LockObserver(std::size_t capacity) : records_(capacity) {}

  std::uint64_t note_enqueue() noexcept { return enqueue_.fetch_add(1, std::memory_order_relaxed); }

  // Call while holding the observed lock.
  std::uint64_t note_acquire(std::uint32_t thread, CoreClass cls, std::uint64_t enqueue_seq,
                             std::uint64_t request_ns) noexcept {
    std::uint64_t seq = acquire_.fetch_add(1, std::memory_order_relaxed);
    if (seq < records_.size()) {
      records_[seq] = AcquisitionRecord{thread, cls, enqueue_seq, seq, request_ns, now_ns()};
    }
    return seq;
  }

  std::size_t size() const noexcept {
    return std::min<std::size_t>(acquire_.load(std::memory_order_acquire), records_.size());
  }

  std::vector<AcquisitionRecord> records() const {
    return {records_.begin(), records_.begin() + static_cast<std::ptrdiff_t>(size())};
  }

  std::uint64_t count(CoreClass cls) const noexcept {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += records_[i].cls == cls;
    return n;
  }

  // acquire_seq over all records is exactly 0..N-1.
  bool sequence_is_gap_free() const {
    std::size_t n = size();
    std::vector<bool> seen(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t s = records_[i].acquire_seq;
      if (s >= n || seen[s]) return false;
      seen[s] = true;
    }
    return true;
  }

  void reset() noexcept {
    enqueue_.store(0, std::memory_order_relaxed);
    acquire_.store(0, std::memory_order_relaxed);
  }

 private:
  std::vector<AcquisitionRecord> records_;
  std::atomic<std::uint64_t> enqueue_{0};
  std::atomic<std::uint64_t> acquire_{0};
};

}  // namespace asl
