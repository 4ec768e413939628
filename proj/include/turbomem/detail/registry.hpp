#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>

namespace turbomem::detail {

// Counter with a single writer: plain load+store, no read-modify-write on
// shared state. Other threads may read it at any time.
class OwnerCounter {
 public:
  void add(std::uint64_t n) noexcept { v_.store(v_.load(std::memory_order_relaxed) + n, std::memory_order_relaxed); }
  std::uint64_t get() const noexcept { return v_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> v_{0};
};

// Per-registration bookkeeping shared by every handler that hands out
// thread handles. Counters are cumulative across reuse of the slot.
struct alignas(64) RegistrationCounters {
  std::atomic<bool> active{false};
  OwnerCounter allocs;
  OwnerCounter frees;
  OwnerCounter pushed_nodes;
  OwnerCounter popped_nodes;
  OwnerCounter push_ops;
  OwnerCounter pop_ops;
  OwnerCounter cas_retries;
};

// Fixed table of registrations. Claiming is a CAS on the entry's active
// flag; release is a store. Both happen off the data path.
template <class Entry>
class RegistrationTable {
 public:
  explicit RegistrationTable(std::size_t n) : entries_(std::make_unique<Entry[]>(n)), size_(n) {}

  std::optional<std::size_t> claim() noexcept {
    for (std::size_t i = 0; i < size_; ++i) {
      bool expected = false;
      if (!entries_[i].active.load(std::memory_order_relaxed) &&
          entries_[i].active.compare_exchange_strong(expected, true, std::memory_order_acquire)) {
        return i;
      }
    }
    return std::nullopt;
  }

  void release(std::size_t i) noexcept { entries_[i].active.store(false, std::memory_order_release); }

  Entry& operator[](std::size_t i) noexcept { return entries_[i]; }
  const Entry& operator[](std::size_t i) const noexcept { return entries_[i]; }
  std::size_t size() const noexcept { return size_; }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < size_; ++i) fn(i, entries_[i]);
  }

 private:
  std::unique_ptr<Entry[]> entries_;
  std::size_t size_;
};

}  // namespace turbomem::detail
