#pragma once

#include <cstdint>

namespace turbomem::detail {

inline void cpu_relax() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#endif
}

// Bounded exponential spin. Never sleeps or yields to the scheduler.
class Backoff {
 public:
  static constexpr std::uint32_t kMaxSpins = 1024;

  void pause() noexcept {
    for (std::uint32_t i = 0; i < spins_; ++i) cpu_relax();
    if (spins_ < kMaxSpins) spins_ <<= 1;
  }

 private:
  std::uint32_t spins_ = 1;
};

}  // namespace turbomem::detail
