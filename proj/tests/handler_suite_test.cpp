#include <gtest/gtest.h>

#include <atomic>
#include <cstring>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include "test_support.hpp"

namespace turbomem {
namespace {

using testing::ClaimMap;
using testing::ReferencePool;
using testing::random_trace;
using testing::region_for;
using testing::replay_outcomes;
using testing::small_config;

// Every handler is exercised with the same oracle and property checks.
template <class H>
class HandlerSuite : public ::testing::Test {};

using Handlers = ::testing::Types<Pool, GlobalOnlyPool, LockedRingPool>;
TYPED_TEST_SUITE(HandlerSuite, Handlers);

// Single-thread outcomes equal the brute-force reference: an alloc of n
// succeeds iff at least n slots are free somewhere in the system.
TYPED_TEST(HandlerSuite, OutcomesMatchReference) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const std::size_t capacity = 8 + seed * 7;
    auto cfg = small_config(capacity, 4 + seed % 5);
    cfg.audit = true;
    auto region = region_for(cfg);
    TypeParam pool(cfg, region);
    ReferencePool ref(capacity);
    const auto trace = random_trace(seed, 3000, 12);
    EXPECT_EQ(replay_outcomes(pool, trace), replay_outcomes(ref, trace)) << "seed " << seed;
    const auto rep = pool.audit();
    EXPECT_TRUE(rep.ok) << rep.detail;
    EXPECT_EQ(rep.allocated, 0u);
  }
}

TYPED_TEST(HandlerSuite, SlotAddressesAreDistinctAndWritable) {
  auto cfg = small_config(64, 4);
  cfg.object_size = 100;
  auto region = region_for(cfg);
  TypeParam pool(cfg, region);
  auto h = pool.register_thread();
  std::vector<SlotIndex> all(64);
  ASSERT_TRUE(pool.try_alloc_bulk(h, all));
  for (auto s : all) std::memset(pool.slot_address(s), static_cast<int>(s.value()), cfg.object_size);
  for (auto s : all) {
    const auto* p = reinterpret_cast<const unsigned char*>(pool.slot_address(s));
    for (std::size_t i = 0; i < cfg.object_size; ++i) ASSERT_EQ(p[i], static_cast<unsigned char>(s.value()));
  }
  pool.free_bulk(h, all);
  EXPECT_TRUE(pool.audit().ok);
}

// Concurrent random traffic: uniqueness via an external claim map, then
// conservation and structural audit at quiescence.
TYPED_TEST(HandlerSuite, ConcurrentUniquenessAndConservation) {
  constexpr std::size_t kThreads = 4;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto cfg = small_config(2048, 16, kThreads);
    cfg.audit = true;
    auto region = region_for(cfg);
    TypeParam pool(cfg, region);
    ClaimMap claims(cfg.capacity);
    std::atomic<std::uint64_t> failures{0};
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < kThreads; ++t) {
      threads.emplace_back([&, t] {
        auto h = pool.register_thread();
        std::vector<SlotIndex> held;
        std::vector<SlotIndex> buf;
        for (const auto& op : random_trace(seed * 100 + t, 20000, 20)) {
          switch (op.kind) {
            case testing::OpKind::Alloc:
              if (auto s = pool.try_alloc(h)) {
                claims.acquire(*s);
                held.push_back(*s);
              } else {
                ++failures;
              }
              break;
            case testing::OpKind::AllocBulk:
              buf.assign(op.n, SlotIndex{});
              if (pool.try_alloc_bulk(h, buf)) {
                for (auto s : buf) claims.acquire(s);
                held.insert(held.end(), buf.begin(), buf.end());
              } else {
                ++failures;
              }
              break;
            case testing::OpKind::Free:
              if (!held.empty()) {
                const std::size_t i = op.pick % held.size();
                claims.release(held[i]);
                pool.free(h, held[i]);
                held[i] = held.back();
                held.pop_back();
              }
              break;
            case testing::OpKind::FreeBulk: {
              const std::size_t k = std::min(op.n, held.size());
              std::span<const SlotIndex> tail(held.data() + held.size() - k, k);
              for (auto s : tail) claims.release(s);
              pool.free_bulk(h, tail);
              held.resize(held.size() - k);
              break;
            }
          }
          // Bound the working set so the pool never runs dry.
          if (held.size() > 200) {
            for (auto s : held) claims.release(s);
            pool.free_bulk(h, held);
            held.clear();
          }
        }
        for (auto s : held) claims.release(s);
        pool.free_bulk(h, held);
        pool.drain_thread(h);
      });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(claims.violations(), 0u);
    EXPECT_EQ(failures.load(), 0u);
    const auto st = pool.stats();
    EXPECT_EQ(st.global_free + st.cached_total() + st.total_allocated, cfg.capacity);
    EXPECT_EQ(st.total_allocated, 0u);
    const auto rep = pool.audit();
    EXPECT_TRUE(rep.ok) << rep.detail;
    EXPECT_EQ(rep.double_claims, 0u);
  }
}

TYPED_TEST(HandlerSuite, RetiredHandleIsRejected) {
  auto cfg = small_config(16, 4);
  auto region = region_for(cfg);
  TypeParam pool(cfg, region);
  auto h = pool.register_thread();
  pool.drain_thread(h);
  EXPECT_FALSE(h.active());
  try {
    pool.try_alloc(h);
    ADD_FAILURE() << "expected handle_retired";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::handle_retired);
  }
}

// Records every successful head replacement from any thread.
struct TagLog {
  struct Shared {
    explicit Shared(std::size_t n) : events(n) {}
    std::vector<std::pair<std::uint32_t, std::uint32_t>> events;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> overflow{0};
  };
  Shared* log = nullptr;
  void on_replace(PackedHead before, PackedHead after) noexcept {
    const std::size_t i = log->next.fetch_add(1, std::memory_order_relaxed);
    if (i < log->events.size())
      log->events[i] = {before.tag, after.tag};
    else
      log->overflow.fetch_add(1, std::memory_order_relaxed);
  }
};

// Logged run: each successful CAS advances the tag by exactly one, no tag
// is ever produced twice, and the final tag equals the number of global
// push and pop operations.
TEST(AbaTags, LoggedConcurrentRun) {
  TagLog::Shared shared(4'000'000);
  auto cfg = small_config(512, 4, 4);
  cfg.audit = true;
  auto region = region_for(cfg);
  BasicPool<TagLog> pool(cfg, region, TagLog{&shared});
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      auto h = pool.register_thread();
      std::mt19937 rng(t);
      std::vector<SlotIndex> held;
      for (int i = 0; i < 100000; ++i) {
        if (held.size() < 16 && (held.empty() || rng() % 2)) {
          if (auto s = pool.try_alloc(h)) held.push_back(*s);
        } else {
          pool.free(h, held.back());
          held.pop_back();
        }
      }
      pool.free_bulk(h, held);
    });
  }
  for (auto& t : threads) t.join();

  ASSERT_EQ(shared.overflow.load(), 0u);
  const std::size_t n = shared.next.load();
  const auto st = pool.stats();
  EXPECT_EQ(n, st.global_push_ops + st.global_pop_ops);
  EXPECT_EQ(pool.head().tag, static_cast<std::uint32_t>(n));
  std::vector<std::uint8_t> produced(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [before, after] = shared.events[i];
    ASSERT_EQ(after, before + 1);
    ASSERT_LE(after, n);
    ASSERT_EQ(produced[after]++, 0) << "tag " << after << " produced twice";
  }
  for (std::size_t t = 1; t <= n; ++t) ASSERT_EQ(produced[t], 1);
  EXPECT_TRUE(pool.audit().ok);
}

}  // namespace
}  // namespace turbomem
