#include <gtest/gtest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "turbomem/treiber_stack.hpp"

namespace turbomem {
namespace {

struct Slots {
  explicit Slots(std::size_t n, std::size_t stride = 64) : stride(stride), bytes(n * stride + 64) {}
  std::byte* base() {
    auto p = reinterpret_cast<std::uintptr_t>(bytes.data());
    return bytes.data() + ((64 - p % 64) % 64);
  }
  std::size_t stride;
  std::vector<std::byte> bytes;
};

TEST(TreiberStack, LinkAllOrdersSlotsAscending) {
  Slots mem(5);
  TreiberStack<> st(mem.base(), mem.stride, 5);
  st.link_all();
  EXPECT_EQ(st.head().tag, 0u);
  EXPECT_EQ(st.head().top, SlotIndex{0});
  std::uint64_t retries = 0;
  for (std::uint32_t i = 0; i < 5; ++i) EXPECT_EQ(st.pop(retries), SlotIndex{i});
  EXPECT_FALSE(st.pop(retries).has_value());
  EXPECT_TRUE(st.head().top.is_nil());
  EXPECT_EQ(retries, 0u);
}

TEST(TreiberStack, PushChainPutsFirstOnTop) {
  Slots mem(4);
  TreiberStack<> st(mem.base(), mem.stride, 4);
  st.link_all();
  std::uint64_t r = 0;
  std::vector<SlotIndex> taken;
  while (auto s = st.pop(r)) taken.push_back(*s);
  const std::vector<SlotIndex> chain{SlotIndex{2}, SlotIndex{0}, SlotIndex{3}};
  st.push_chain(chain, r);
  EXPECT_EQ(st.size_quiescent(), 3u);
  EXPECT_EQ(*st.pop(r), SlotIndex{2});
  EXPECT_EQ(*st.pop(r), SlotIndex{0});
  EXPECT_EQ(*st.pop(r), SlotIndex{3});
}

TEST(TreiberStack, TagIncrementsOnEverySuccessfulReplacement) {
  Slots mem(8);
  TreiberStack<> st(mem.base(), mem.stride, 8);
  st.link_all();
  std::uint64_t r = 0;
  std::uint32_t expected = 0;
  for (int round = 0; round < 50; ++round) {
    auto s = st.pop(r);
    ASSERT_TRUE(s);
    EXPECT_EQ(st.head().tag, ++expected);
    st.push(*s, r);
    EXPECT_EQ(st.head().tag, ++expected);
  }
}

TEST(TreiberStack, WalkDetectsCycle) {
  Slots mem(3);
  TreiberStack<> st(mem.base(), mem.stride, 3);
  st.link_all();
  // Corrupt slot 2's link back to slot 0.
  *reinterpret_cast<std::uint64_t*>(mem.base() + 2 * mem.stride) = 0;
  EXPECT_THROW(st.size_quiescent(), Error);
}

TEST(TreiberStack, ConcurrentPopPushPreservesNodes) {
  constexpr std::size_t kSlots = 256;
  Slots mem(kSlots);
  TreiberStack<> st(mem.base(), mem.stride, kSlots);
  st.link_all();
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      std::uint64_t r = 0;
      for (int i = 0; i < 100000; ++i) {
        if (auto s = st.pop(r)) {
          *reinterpret_cast<std::uint64_t*>(mem.base() + s->value() * mem.stride) = 0xDEADBEEF;
          st.push(*s, r);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  std::vector<int> seen(kSlots, 0);
  EXPECT_EQ(st.walk([&](SlotIndex s) { ++seen[s.value()]; }), kSlots);
  for (int c : seen) EXPECT_EQ(c, 1);
}

}  // namespace
}  // namespace turbomem
