#pragma once

#include <cstdint>
#include <thread>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif

#include "asl/platform.hpp"

namespace asl {

inline void cpu_relax() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  _mm_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#else
  asm volatile("" ::: "memory");
#endif
}

// Pause-spins a bounded number of times, then yields the CPU on every call.
// With a single CPU the waiter can only make progress by letting the holder
// run, so the pause phase is skipped entirely.
class SpinWait {
 public:
  void relax() noexcept {
    if (count_ < limit()) {
      ++count_;
      cpu_relax();
    } else {
      std::this_thread::yield();
    }
  }

  void reset() noexcept { count_ = 0; }

  static unsigned limit() noexcept {
    static const unsigned v = online_cpu_count() > 1 ? 1024u : 0u;
    return v;
  }

 private:
  unsigned count_ = 0;
};

}  // namespace asl
