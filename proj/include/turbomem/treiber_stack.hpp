#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "turbomem/detail/backoff.hpp"
#include "turbomem/error.hpp"
#include "turbomem/slot.hpp"

namespace turbomem {

// Trace policy invoked after every successful head replacement.
struct NoHeadTrace {
  void on_replace(PackedHead, PackedHead) noexcept {}
};

// Lock-free LIFO of slot indices. Links are intrusive: a free slot's first
// 8 bytes hold the index of the next free slot. The head carries a
// generation tag that is bumped on every successful CAS, so a pop that read
// its link under a stale head cannot succeed.
//
// Links are accessed through atomic_ref because a racing pop may read the
// link word of a slot that another thread has just taken and is writing to;
// that read is discarded when the CAS fails.
template <class Trace = NoHeadTrace>
class TreiberStack {
 public:
  TreiberStack(std::byte* base, std::size_t stride, std::size_t capacity, Trace trace = {}) noexcept
      : base_(base), stride_(stride), capacity_(capacity), trace_(std::move(trace)) {}

  TreiberStack(const TreiberStack&) = delete;
  TreiberStack& operator=(const TreiberStack&) = delete;

  // Links every slot 0 -> 1 -> ... -> capacity-1 and resets the tag.
  // Not thread-safe.
  void link_all() noexcept {
    for (std::size_t i = 0; i + 1 < capacity_; ++i) link(SlotIndex{static_cast<std::uint32_t>(i)}).store(i + 1, std::memory_order_relaxed);
    if (capacity_ > 0) {
      link(SlotIndex{static_cast<std::uint32_t>(capacity_ - 1)}).store(SlotIndex::kNilValue, std::memory_order_relaxed);
    }
    const PackedHead h{capacity_ > 0 ? SlotIndex{0} : SlotIndex::nil(), 0};
    head_.store(h.pack(), std::memory_order_release);
  }

  // Detaches the top node. `retries` is incremented once per failed CAS.
  std::optional<SlotIndex> pop(std::uint64_t& retries) noexcept {
    std::uint64_t cur = head_.load(std::memory_order_acquire);
    detail::Backoff backoff;
    for (;;) {
      const PackedHead h = PackedHead::unpack(cur);
      if (h.top.is_nil()) return std::nullopt;
      const auto next = static_cast<std::uint32_t>(link(h.top).load(std::memory_order_relaxed));
      const PackedHead replacement{SlotIndex{next}, h.tag + 1};
      if (head_.compare_exchange_weak(cur, replacement.pack(), std::memory_order_acq_rel,
                                      std::memory_order_acquire)) {
        trace_.on_replace(h, replacement);
        return h.top;
      }
      ++retries;
      backoff.pause();
    }
  }

  // Pushes `chain` with one CAS loop; chain[0] becomes the new top.
  void push_chain(std::span<const SlotIndex> chain, std::uint64_t& retries) noexcept {
    if (chain.empty()) return;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      link(chain[i]).store(chain[i + 1].value(), std::memory_order_relaxed);
    }
    auto tail = link(chain.back());
    std::uint64_t cur = head_.load(std::memory_order_relaxed);
    detail::Backoff backoff;
    for (;;) {
      const PackedHead h = PackedHead::unpack(cur);
      tail.store(h.top.value(), std::memory_order_relaxed);
      const PackedHead replacement{chain.front(), h.tag + 1};
      if (head_.compare_exchange_weak(cur, replacement.pack(), std::memory_order_release,
                                      std::memory_order_relaxed)) {
        trace_.on_replace(h, replacement);
        return;
      }
      ++retries;
      backoff.pause();
    }
  }

  void push(SlotIndex s, std::uint64_t& retries) noexcept { push_chain(std::span<const SlotIndex>(&s, 1), retries); }

  PackedHead head() const noexcept { return PackedHead::unpack(head_.load(std::memory_order_acquire)); }

  // Walks the list and invokes fn(slot) per node. Quiescent use only.
  // Throws on an out-of-range link or a cycle.
  template <class Fn>
  std::size_t walk(Fn&& fn) const {
    std::size_t n = 0;
    for (SlotIndex s = head().top; !s.is_nil();) {
      if (s.value() >= capacity_) throw Error(Errc::out_of_range, "free list link outside pool");
      if (++n > capacity_) throw Error(Errc::out_of_range, "free list cycle");
      fn(s);
      s = SlotIndex{static_cast<std::uint32_t>(link(s).load(std::memory_order_relaxed))};
    }
    return n;
  }

  std::size_t size_quiescent() const {
    return walk([](SlotIndex) {});
  }

  Trace& trace() noexcept { return trace_; }

 private:
  std::atomic_ref<std::uint64_t> link(SlotIndex s) const noexcept {
    return std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(base_ + std::size_t{s.value()} * stride_));
  }

  std::byte* base_;
  std::size_t stride_;
  std::size_t capacity_;
  alignas(64) std::atomic<std::uint64_t> head_{PackedHead{}.pack()};
  [[no_unique_address]] Trace trace_;
};

}  // namespace turbomem
