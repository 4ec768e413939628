#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

#include "turbomem/error.hpp"
#include "turbomem/slot.hpp"

namespace turbomem::detail {

// Per-slot epoch: odd means held by a caller, even means free. Each
// transition bumps the epoch by one.
class ClaimStamps {
 public:
  // n == 0 disables stamping.
  explicit ClaimStamps(std::size_t n = 0) : size_(n) {
    if (n == 0) return;
    stamps_ = std::make_unique<std::atomic<std::uint32_t>[]>(n);
    for (std::size_t i = 0; i < n; ++i) stamps_[i].store(0, std::memory_order_relaxed);
  }

  bool enabled() const noexcept { return size_ != 0; }

  // A claim on an already-held slot is a pool bug, not a caller bug; it is
  // counted and surfaced through audit() rather than thrown.
  void claim(SlotIndex s) noexcept {
    auto& st = stamps_[s.value()];
    std::uint32_t v = st.load(std::memory_order_relaxed);
    do {
      if (v & 1u) {
        double_claims_.fetch_add(1, std::memory_order_relaxed);
        return;
      }
    } while (!st.compare_exchange_weak(v, v + 1, std::memory_order_acq_rel, std::memory_order_relaxed));
  }

  void release(SlotIndex s) {
    auto& st = stamps_[s.value()];
    std::uint32_t v = st.load(std::memory_order_relaxed);
    do {
      if (!(v & 1u)) throw Error(Errc::double_free, "slot " + std::to_string(s.value()));
    } while (!st.compare_exchange_weak(v, v + 1, std::memory_order_acq_rel, std::memory_order_relaxed));
  }

  bool held(SlotIndex s) const noexcept { return stamps_[s.value()].load(std::memory_order_relaxed) & 1u; }

  std::size_t held_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size_; ++i) n += stamps_[i].load(std::memory_order_relaxed) & 1u;
    return n;
  }

  std::uint64_t double_claims() const noexcept { return double_claims_.load(std::memory_order_relaxed); }

 private:
  std::unique_ptr<std::atomic<std::uint32_t>[]> stamps_;
  std::size_t size_ = 0;
  std::atomic<std::uint64_t> double_claims_{0};
};

}  // namespace turbomem::detail
