#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
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

/// Fixed-size object pool: a global lock-free free stack fronted by one
/// private cache per registered thread.
///
/// A thread registers once and passes its handle to every call. Cache hits
/// touch only the handle's own registration; misses refill `refill_batch`
/// slots from the global stack, and a free into a full cache first flushes
/// `flush_batch` slots back in one CAS.
///
/// The pool does not own its backing memory. The region must outlive it and
/// must not be touched by anyone else while the pool is alive.
///
/// Releasing a slot twice is undefined unless the pool was built with
/// `PoolConfig::audit`, in which case the second free throws DoubleFree.
template <class Trace = NoHeadTrace>
class BasicPool {
  struct Registration : detail::RegistrationCounters {
    std::atomic<std::uint32_t> count{0};
    SlotIndex* slots = nullptr;
  };

 public:
  class Handle {
   public:
    Handle() = default;
    Handle(Handle&& o) noexcept : pool_(std::exchange(o.pool_, nullptr)), id_(o.id_) {}
    Handle& operator=(Handle&& o) noexcept {
      if (this != &o) {
        retire();
        pool_ = std::exchange(o.pool_, nullptr);
        id_ = o.id_;
      }
      return *this;
    }
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { retire(); }

    bool active() const noexcept { return pool_ != nullptr; }
    std::size_t id() const noexcept { return id_; }
    std::size_t cached() const noexcept {
      return pool_ ? pool_->regs_[id_].count.load(std::memory_order_relaxed) : 0;
    }

   private:
    friend class BasicPool;
    Handle(BasicPool* pool, std::size_t id) noexcept : pool_(pool), id_(id) {}
    void retire() noexcept {
      if (pool_) pool_->drain_thread(*this);
    }

    BasicPool* pool_ = nullptr;
    std::size_t id_ = 0;
  };

  BasicPool(const PoolConfig& config, std::span<std::byte> region, Trace trace = {})
      : cfg_(checked(config, region)),
        base_(region.data()),
        stride_(cfg_.stride()),
        stack_(region.data(), stride_, cfg_.capacity, std::move(trace)),
        regs_(cfg_.max_threads),
        cache_storage_(std::make_unique<SlotIndex[]>(cfg_.max_threads * cfg_.cache_capacity)),
        stamps_(cfg_.audit ? cfg_.capacity : 0) {
    for (std::size_t i = 0; i < cfg_.max_threads; ++i) regs_[i].slots = &cache_storage_[i * cfg_.cache_capacity];
    stack_.link_all();
  }

  BasicPool(const PoolConfig& config, const MemoryRegion& region, Trace trace = {})
      : BasicPool(checked_policy(config, region), region.bytes(), std::move(trace)) {}

  BasicPool(const BasicPool&) = delete;
  BasicPool& operator=(const BasicPool&) = delete;

  Handle register_thread() {
    const auto id = regs_.claim();
    if (!id) throw Error(Errc::registration_limit, std::to_string(cfg_.max_threads) + " threads");
    return Handle(this, *id);
  }

  std::optional<SlotIndex> try_alloc(Handle& h) {
    Registration& r = owned(h);
    std::uint32_t n = r.count.load(std::memory_order_relaxed);
    if (n == 0) {
      n = refill(r, 0, cfg_.refill_batch);
      if (n == 0) return std::nullopt;
    }
    const SlotIndex s = r.slots[--n];
    r.count.store(n, std::memory_order_relaxed);
    r.allocs.add(1);
    if (stamps_.enabled()) stamps_.claim(s);
    return s;
  }

  SlotIndex alloc(Handle& h) {
    if (auto s = try_alloc(h)) return *s;
    throw Error(Errc::pool_exhausted);
  }

  void free(Handle& h, SlotIndex s) {
    Registration& r = owned(h);
    check_range(s);
    if (stamps_.enabled()) stamps_.release(s);
    std::uint32_t n = r.count.load(std::memory_order_relaxed);
    if (n == cfg_.cache_capacity) n = flush(r, n, cfg_.flush_batch);
    r.slots[n++] = s;
    r.count.store(n, std::memory_order_relaxed);
    r.frees.add(1);
  }

  // All-or-nothing. Leaves the handle's cache and the global stack in the
  // state `out.size()` single allocs would, or restores them on failure.
  bool try_alloc_bulk(Handle& h, std::span<SlotIndex> out) {
    Registration& r = owned(h);
    const std::size_t want = out.size();
    if (want == 0) return true;
    const std::uint32_t have = r.count.load(std::memory_order_relaxed);

    if (want <= have) {
      for (std::size_t i = 0; i < want; ++i) out[i] = r.slots[have - 1 - i];
      r.count.store(static_cast<std::uint32_t>(have - want), std::memory_order_relaxed);
    } else {
      const std::size_t short_by = want - have;
      std::uint64_t retries = 0;
      std::size_t got = 0;
      for (; got < short_by; ++got) {
        const auto s = stack_.pop(retries);
        if (!s) break;
        out[have + got] = *s;
      }
      r.pop_ops.add(got);
      r.popped_nodes.add(got);
      if (got < short_by) {
        if (got) {
          stack_.push_chain(out.subspan(have, got), retries);
          r.push_ops.add(1);
          r.pushed_nodes.add(got);
        }
        r.cas_retries.add(retries);
        return false;
      }
      r.cas_retries.add(retries);
      for (std::size_t i = 0; i < have; ++i) out[i] = r.slots[have - 1 - i];
      // Single allocs would have refilled in whole batches; keep the remainder.
      const std::size_t batches = (short_by + cfg_.refill_batch - 1) / cfg_.refill_batch;
      const std::size_t extra = batches * cfg_.refill_batch - short_by;
      r.count.store(0, std::memory_order_relaxed);
      if (extra) refill(r, 0, extra);
    }
    r.allocs.add(want);
    if (stamps_.enabled())
      for (SlotIndex s : out) stamps_.claim(s);
    return true;
  }

  std::vector<SlotIndex> alloc_bulk(Handle& h, std::size_t n) {
    std::vector<SlotIndex> out(n);
    if (!try_alloc_bulk(h, out)) throw Error(Errc::pool_exhausted, "bulk of " + std::to_string(n));
    return out;
  }

  void free_bulk(Handle& h, std::span<const SlotIndex> slots) {
    for (SlotIndex s : slots) free(h, s);
  }

  // Returns every cached slot to the global stack and retires the handle.
  void drain_thread(Handle& h) noexcept {
    if (h.pool_ != this) return;
    Registration& r = regs_[h.id_];
    const std::uint32_t n = r.count.load(std::memory_order_relaxed);
    if (n) flush(r, n, n);
    h.pool_ = nullptr;
    regs_.release(h.id_);
  }

  std::size_t slot_offset(SlotIndex s) const {
    check_range(s);
    return std::size_t{s.value()} * stride_;
  }

  std::byte* slot_address(SlotIndex s) const { return base_ + slot_offset(s); }

  SlotIndex slot_of(const void* p) const {
    const auto off = static_cast<std::size_t>(static_cast<const std::byte*>(p) - base_);
    const SlotIndex s{static_cast<std::uint32_t>(off / stride_)};
    check_range(s);
    return s;
  }

  PoolStats stats() const {
    PoolStats st;
    st.capacity = cfg_.capacity;
    st.per_thread_cached.resize(regs_.size());
    std::uint64_t pushed = 0, popped = 0, allocs = 0, frees = 0;
    regs_.for_each([&](std::size_t i, const Registration& r) {
      st.per_thread_cached[i] = r.count.load(std::memory_order_relaxed);
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

  // Structural check; quiescent use only. Verifies that the global stack
  // and the caches hold disjoint slots whose count matches the counters.
  AuditReport audit() const {
    AuditReport rep;
    const PoolStats st = stats();
    std::vector<std::uint8_t> seen(cfg_.capacity, 0);
    std::size_t dupes = 0;
    auto mark = [&](SlotIndex s) {
      if (s.value() >= cfg_.capacity || seen[s.value()]++) ++dupes;
    };
    try {
      rep.walked_free = stack_.walk(mark);
    } catch (const Error& e) {
      rep.fail(e.what());
    }
    regs_.for_each([&](std::size_t, const Registration& r) {
      const std::uint32_t n = r.count.load(std::memory_order_relaxed);
      rep.cached += n;
      for (std::uint32_t i = 0; i < n; ++i) mark(r.slots[i]);
    });
    rep.allocated = st.total_allocated;
    if (dupes) rep.fail(std::to_string(dupes) + " slots listed free twice");
    if (rep.walked_free != st.global_free)
      rep.fail("global stack holds " + std::to_string(rep.walked_free) + ", counters say " +
               std::to_string(st.global_free));
    if (rep.walked_free + rep.cached + rep.allocated != cfg_.capacity) rep.fail("conservation violated");
    if (stamps_.enabled()) {
      rep.double_claims = stamps_.double_claims();
      if (rep.double_claims) rep.fail(std::to_string(rep.double_claims) + " double claims");
      if (stamps_.held_count() != rep.allocated) rep.fail("claim stamps disagree with allocated count");
      for (std::size_t i = 0; i < cfg_.capacity; ++i)
        if (seen[i] && stamps_.held(SlotIndex{static_cast<std::uint32_t>(i)})) {
          rep.fail("slot " + std::to_string(i) + " both free and claimed");
          break;
        }
    }
    return rep;
  }

  const PoolConfig& config() const noexcept { return cfg_; }
  std::size_t capacity() const noexcept { return cfg_.capacity; }
  std::size_t stride() const noexcept { return stride_; }
  std::byte* base() const noexcept { return base_; }
  PackedHead head() const noexcept { return stack_.head(); }
  Trace& trace() noexcept { return stack_.trace(); }

 private:
  static const PoolConfig& checked(const PoolConfig& cfg, std::span<std::byte> region) {
    cfg.validate();
    if (region.size() < cfg.capacity * cfg.stride())
      throw Error(Errc::region_too_small, std::to_string(region.size()) + " < " +
                                              std::to_string(cfg.capacity * cfg.stride()) + " bytes");
    if (reinterpret_cast<std::uintptr_t>(region.data()) % cfg.alignment != 0)
      throw Error(Errc::misaligned_region, "base not aligned to " + std::to_string(cfg.alignment));
    return cfg;
  }

  static const PoolConfig& checked_policy(const PoolConfig& cfg, const MemoryRegion& region) {
    if (region.released()) throw Error(Errc::released);
    if (cfg.huge_policy != HugePolicy::PlainPages && region.policy() == HugePolicy::PlainPages)
      throw Error(Errc::invalid_config, "huge-page pool on a PlainPages region");
    return cfg;
  }

  Registration& owned(Handle& h) {
    if (h.pool_ != this) throw Error(Errc::handle_retired);
    return regs_[h.id_];
  }

  void check_range(SlotIndex s) const {
    if (s.value() >= cfg_.capacity) throw Error(Errc::out_of_range, std::to_string(s.value()));
  }

  // Pops up to `want` slots into the cache starting at `n`; returns the new
  // count. One CAS per slot.
  std::uint32_t refill(Registration& r, std::uint32_t n, std::size_t want) noexcept {
    std::uint64_t retries = 0;
    std::size_t got = 0;
    for (; got < want; ++got) {
      const auto s = stack_.pop(retries);
      if (!s) break;
      r.slots[n + got] = *s;
    }
    n += static_cast<std::uint32_t>(got);
    r.count.store(n, std::memory_order_relaxed);
    r.pop_ops.add(got);
    r.popped_nodes.add(got);
    r.cas_retries.add(retries);
    return n;
  }

  // Pushes the top `k` cached slots in one chain; returns the new count.
  std::uint32_t flush(Registration& r, std::uint32_t n, std::size_t k) noexcept {
    std::uint64_t retries = 0;
    stack_.push_chain(std::span<const SlotIndex>(r.slots + (n - k), k), retries);
    n -= static_cast<std::uint32_t>(k);
    r.count.store(n, std::memory_order_relaxed);
    r.push_ops.add(1);
    r.pushed_nodes.add(k);
    r.cas_retries.add(retries);
    return n;
  }

  PoolConfig cfg_;
  std::byte* base_;
  std::size_t stride_;
  TreiberStack<Trace> stack_;
  detail::RegistrationTable<Registration> regs_;
  std::unique_ptr<SlotIndex[]> cache_storage_;
  detail::ClaimStamps stamps_;
};

using Pool = BasicPool<>;
using ThreadHandle = Pool::Handle;

}  // namespace turbomem
