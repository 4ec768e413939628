#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "turbomem/config.hpp"
#include "turbomem/detail/claim_stamps.hpp"
#include "turbomem/detail/registry.hpp"
#include "turbomem/error.hpp"
#include "turbomem/memory_region.hpp"
#include "turbomem/slot.hpp"
#include "turbomem/stats.hpp"
#include "turbomem/treiber_stack.hpp"

namespace turbomem {

namespace detail {

// Slot layout shared by the baselines: capacity slots of `stride` bytes.
class SlotGeometry {
 public:
  SlotGeometry(const PoolConfig& cfg, std::span<std::byte> region) : base_(region.data()), stride_(cfg.stride()), capacity_(cfg.capacity) {
    if (cfg.object_size < sizeof(std::uint64_t) || !std::has_single_bit(cfg.alignment) || cfg.alignment < kCacheLine ||
        cfg.capacity == 0 || cfg.capacity > std::size_t{0xFFFF'FFFE})
      throw Error(Errc::invalid_config, "bad slot geometry");
    if (region.size() < cfg.capacity * stride_) throw Error(Errc::region_too_small);
    if (reinterpret_cast<std::uintptr_t>(region.data()) % cfg.alignment) throw Error(Errc::misaligned_region);
  }

  void check_range(SlotIndex s) const {
    if (s.value() >= capacity_) throw Error(Errc::out_of_range, std::to_string(s.value()));
  }
  std::byte* slot_address(SlotIndex s) const {
    check_range(s);
    return base_ + std::size_t{s.value()} * stride_;
  }
  SlotIndex slot_of(const void* p) const {
    const SlotIndex s{static_cast<std::uint32_t>(static_cast<std::size_t>(static_cast<const std::byte*>(p) - base_) / stride_)};
    check_range(s);
    return s;
  }
  std::byte* base() const noexcept { return base_; }
  std::size_t stride() const noexcept { return stride_; }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::byte* base_;
  std::size_t stride_;
  std::size_t capacity_;
};

}  // namespace detail

// Every get and put is one CAS on the shared stack; no caches.
class GlobalOnlyPool {
 public:
  class Handle {
   public:
    Handle() = default;
    Handle(Handle&& o) noexcept : pool_(std::exchange(o.pool_, nullptr)), id_(o.id_) {}
    Handle& operator=(Handle&& o) noexcept {
      if (this != &o) {
        if (pool_) pool_->drain_thread(*this);
        pool_ = std::exchange(o.pool_, nullptr);
        id_ = o.id_;
      }
      return *this;
    }
    ~Handle() {
      if (pool_) pool_->drain_thread(*this);
    }
    bool active() const noexcept { return pool_ != nullptr; }
    std::size_t cached() const noexcept { return 0; }

   private:
    friend class GlobalOnlyPool;
    Handle(GlobalOnlyPool* p, std::size_t id) noexcept : pool_(p), id_(id) {}
    GlobalOnlyPool* pool_ = nullptr;
    std::size_t id_ = 0;
  };

  GlobalOnlyPool(const PoolConfig& cfg, std::span<std::byte> region)
      : cfg_(cfg),
        geo_(cfg, region),
        stack_(region.data(), geo_.stride(), cfg.capacity),
        regs_(cfg.max_threads),
        stamps_(cfg.audit ? cfg.capacity : 0) {
    stack_.link_all();
  }
  GlobalOnlyPool(const PoolConfig& cfg, const MemoryRegion& region) : GlobalOnlyPool(cfg, region.bytes()) {}

  Handle register_thread() {
    const auto id = regs_.claim();
    if (!id) throw Error(Errc::registration_limit);
    return Handle(this, *id);
  }

  std::optional<SlotIndex> try_alloc(Handle& h) {
    auto& r = owned(h);
    std::uint64_t retries = 0;
    const auto s = stack_.pop(retries);
    r.cas_retries.add(retries);
    if (!s) return std::nullopt;
    r.pop_ops.add(1);
    r.popped_nodes.add(1);
    r.allocs.add(1);
    if (stamps_.enabled()) stamps_.claim(*s);
    return s;
  }

  SlotIndex alloc(Handle& h) {
    if (auto s = try_alloc(h)) return *s;
    throw Error(Errc::pool_exhausted);
  }

  void free(Handle& h, SlotIndex s) { free_bulk(h, std::span<const SlotIndex>(&s, 1)); }

  bool try_alloc_bulk(Handle& h, std::span<SlotIndex> out) {
    auto& r = owned(h);
    std::uint64_t retries = 0;
    std::size_t got = 0;
    for (; got < out.size(); ++got) {
      const auto s = stack_.pop(retries);
      if (!s) break;
      out[got] = *s;
    }
    r.pop_ops.add(got);
    r.popped_nodes.add(got);
    if (got < out.size()) {
      if (got) {
        stack_.push_chain(out.first(got), retries);
        r.push_ops.add(1);
        r.pushed_nodes.add(got);
      }
      r.cas_retries.add(retries);
      return false;
    }
    r.cas_retries.add(retries);
    r.allocs.add(got);
    if (stamps_.enabled())
      for (SlotIndex s : out) stamps_.claim(s);
    return true;
  }

  void free_bulk(Handle& h, std::span<const SlotIndex> slots) {
    auto& r = owned(h);
    if (slots.empty()) return;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      geo_.check_range(slots[i]);
      if (stamps_.enabled()) {
        try {
          stamps_.release(slots[i]);
        } catch (...) {
          push_counted(r, slots.first(i));
          throw;
        }
      }
    }
    push_counted(r, slots);
  }

  void drain_thread(Handle& h) noexcept {
    if (h.pool_ != this) return;
    h.pool_ = nullptr;
    regs_.release(h.id_);
  }

  std::byte* slot_address(SlotIndex s) const { return geo_.slot_address(s); }
  SlotIndex slot_of(const void* p) const { return geo_.slot_of(p); }

  PoolStats stats() const {
    PoolStats st;
    st.capacity = cfg_.capacity;
    std::uint64_t pushed = 0, popped = 0, allocs = 0, frees = 0;
    regs_.for_each([&](std::size_t, const detail::RegistrationCounters& r) {
      pushed += r.pushed_nodes.get();
      popped += r.popped_nodes.get();
      allocs += r.allocs.get();
      frees += r.frees.get();
      st.global_push_ops += r.push_ops.get();
      st.global_pop_ops += r.pop_ops.get();
      st.cas_retries += r.cas_retries.get();
    });
    st.global_free = static_cast<std::size_t>(cfg_.capacity + pushed - popped);
    st.total_allocated = static_cast<std::size_t>(allocs - frees);
    return st;
  }

  AuditReport audit() const {
    AuditReport rep;
    const PoolStats st = stats();
    std::vector<std::uint8_t> seen(cfg_.capacity, 0);
    std::size_t dupes = 0;
    try {
      rep.walked_free = stack_.walk([&](SlotIndex s) { dupes += seen[s.value()]++ != 0; });
    } catch (const Error& e) {
      rep.fail(e.what());
    }
    rep.allocated = st.total_allocated;
    if (dupes) rep.fail("free list repeats slots");
    if (rep.walked_free != st.global_free) rep.fail("global stack size disagrees with counters");
    if (rep.walked_free + rep.allocated != cfg_.capacity) rep.fail("conservation violated");
    if (stamps_.enabled()) {
      rep.double_claims = stamps_.double_claims();
      if (rep.double_claims) rep.fail("double claims");
      if (stamps_.held_count() != rep.allocated) rep.fail("claim stamps disagree with allocated count");
    }
    return rep;
  }

  const PoolConfig& config() const noexcept { return cfg_; }
  std::size_t capacity() const noexcept { return cfg_.capacity; }
  PackedHead head() const noexcept { return stack_.head(); }

 private:
  detail::RegistrationCounters& owned(Handle& h) {
    if (h.pool_ != this) throw Error(Errc::handle_retired);
    return regs_[h.id_];
  }

  void push_counted(detail::RegistrationCounters& r, std::span<const SlotIndex> slots) noexcept {
    if (slots.empty()) return;
    std::uint64_t retries = 0;
    stack_.push_chain(slots, retries);
    r.push_ops.add(1);
    r.pushed_nodes.add(slots.size());
    r.frees.add(slots.size());
    r.cas_retries.add(retries);
  }

  PoolConfig cfg_;
  detail::SlotGeometry geo_;
  TreiberStack<> stack_;
  detail::RegistrationTable<detail::RegistrationCounters> regs_;
  detail::ClaimStamps stamps_;
};

// FIFO ring of free slots behind one mutex. Stands in for the classic
// shared-ring mempool handler without a per-core cache.
class LockedRingPool {
 public:
  class Handle {
   public:
    Handle() = default;
    Handle(Handle&& o) noexcept : pool_(std::exchange(o.pool_, nullptr)) {}
    Handle& operator=(Handle&& o) noexcept {
      pool_ = std::exchange(o.pool_, nullptr);
      return *this;
    }
    bool active() const noexcept { return pool_ != nullptr; }
    std::size_t cached() const noexcept { return 0; }

   private:
    friend class LockedRingPool;
    explicit Handle(LockedRingPool* p) noexcept : pool_(p) {}
    LockedRingPool* pool_ = nullptr;
  };

  LockedRingPool(const PoolConfig& cfg, std::span<std::byte> region)
      : cfg_(cfg), geo_(cfg, region), ring_(cfg.capacity), count_(cfg.capacity), stamps_(cfg.audit ? cfg.capacity : 0) {
    for (std::size_t i = 0; i < cfg.capacity; ++i) ring_[i] = SlotIndex{static_cast<std::uint32_t>(i)};
  }
  LockedRingPool(const PoolConfig& cfg, const MemoryRegion& region) : LockedRingPool(cfg, region.bytes()) {}

  Handle register_thread() { return Handle(this); }

  std::optional<SlotIndex> try_alloc(Handle& h) {
    owned(h);
    std::optional<SlotIndex> s;
    {
      std::lock_guard lock(mu_);
      if (count_ == 0) return std::nullopt;
      s = take_locked();
      ++allocs_;
    }
    if (stamps_.enabled()) stamps_.claim(*s);
    return s;
  }

  SlotIndex alloc(Handle& h) {
    if (auto s = try_alloc(h)) return *s;
    throw Error(Errc::pool_exhausted);
  }

  void free(Handle& h, SlotIndex s) { free_bulk(h, std::span<const SlotIndex>(&s, 1)); }

  bool try_alloc_bulk(Handle& h, std::span<SlotIndex> out) {
    owned(h);
    {
      std::lock_guard lock(mu_);
      if (count_ < out.size()) return false;
      for (auto& s : out) s = take_locked();
      allocs_ += out.size();
    }
    if (stamps_.enabled())
      for (SlotIndex s : out) stamps_.claim(s);
    return true;
  }

  void free_bulk(Handle& h, std::span<const SlotIndex> slots) {
    owned(h);
    std::size_t ok = 0;
    try {
      for (; ok < slots.size(); ++ok) {
        geo_.check_range(slots[ok]);
        if (stamps_.enabled()) stamps_.release(slots[ok]);
      }
    } catch (...) {
      put_all(slots.first(ok));
      throw;
    }
    put_all(slots);
  }

  void drain_thread(Handle& h) noexcept { h.pool_ = nullptr; }

  std::byte* slot_address(SlotIndex s) const { return geo_.slot_address(s); }
  SlotIndex slot_of(const void* p) const { return geo_.slot_of(p); }

  PoolStats stats() const {
    std::lock_guard lock(mu_);
    PoolStats st;
    st.capacity = cfg_.capacity;
    st.global_free = count_;
    st.total_allocated = static_cast<std::size_t>(allocs_ - frees_);
    return st;
  }

  AuditReport audit() const {
    std::lock_guard lock(mu_);
    AuditReport rep;
    std::vector<std::uint8_t> seen(cfg_.capacity, 0);
    std::size_t dupes = 0;
    for (std::size_t i = 0; i < count_; ++i) {
      const SlotIndex s = ring_[(head_ + i) % cfg_.capacity];
      if (s.value() >= cfg_.capacity || seen[s.value()]++) ++dupes;
    }
    rep.walked_free = count_;
    rep.allocated = static_cast<std::size_t>(allocs_ - frees_);
    if (dupes) rep.fail("ring repeats slots");
    if (rep.walked_free + rep.allocated != cfg_.capacity) rep.fail("conservation violated");
    if (stamps_.enabled()) {
      rep.double_claims = stamps_.double_claims();
      if (rep.double_claims) rep.fail("double claims");
      if (stamps_.held_count() != rep.allocated) rep.fail("claim stamps disagree with allocated count");
    }
    return rep;
  }

  const PoolConfig& config() const noexcept { return cfg_; }
  std::size_t capacity() const noexcept { return cfg_.capacity; }

 private:
  void owned(Handle& h) const {
    if (h.pool_ != this) throw Error(Errc::handle_retired);
  }

  SlotIndex take_locked() noexcept {
    const SlotIndex s = ring_[head_];
    head_ = head_ + 1 == cfg_.capacity ? 0 : head_ + 1;
    --count_;
    return s;
  }

  void put_all(std::span<const SlotIndex> slots) {
    if (slots.empty()) return;
    std::lock_guard lock(mu_);
    for (SlotIndex s : slots) {
      ring_[(head_ + count_) % cfg_.capacity] = s;
      ++count_;
    }
    frees_ += slots.size();
  }

  PoolConfig cfg_;
  detail::SlotGeometry geo_;
  mutable std::mutex mu_;
  std::vector<SlotIndex> ring_;
  std::size_t head_ = 0;
  std::size_t count_;
  std::uint64_t allocs_ = 0;
  std::uint64_t frees_ = 0;
  detail::ClaimStamps stamps_;
};

}  // namespace turbomem
