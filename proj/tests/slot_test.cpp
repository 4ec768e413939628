#include <gtest/gtest.h>

#include <random>

#include "turbomem/config.hpp"
#include "turbomem/slot.hpp"

namespace turbomem {
namespace {

TEST(SlotIndex, DefaultIsNil) {
  SlotIndex s;
  EXPECT_TRUE(s.is_nil());
  EXPECT_FALSE(static_cast<bool>(s));
  EXPECT_EQ(SlotIndex::nil(), s);
  EXPECT_FALSE(SlotIndex{0}.is_nil());
}

TEST(PackedHead, PackUnpackRoundTripsRandomWords) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t word = rng();
    const PackedHead h = PackedHead::unpack(word);
    EXPECT_EQ(h.pack(), word);
    EXPECT_EQ(h.top.value(), static_cast<std::uint32_t>(word));
    EXPECT_EQ(h.tag, static_cast<std::uint32_t>(word >> 32));
  }
}

TEST(PackedHead, NilTopWithTag) {
  const PackedHead h{SlotIndex::nil(), 5};
  EXPECT_TRUE(PackedHead::unpack(h.pack()).top.is_nil());
  EXPECT_EQ(PackedHead::unpack(h.pack()).tag, 5u);
}

TEST(PoolConfig, DefaultsValidate) {
  PoolConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.refill_batch, cfg.cache_capacity / 2);
  EXPECT_EQ(cfg.flush_batch, cfg.cache_capacity / 2);
}

TEST(PoolConfig, StrideRoundsUpToAlignment) {
  PoolConfig cfg;
  cfg.object_size = 256;
  cfg.alignment = 64;
  EXPECT_EQ(cfg.stride(), 256u);
  cfg.object_size = 200;
  EXPECT_EQ(cfg.stride(), 256u);
  cfg.object_size = 8;
  EXPECT_EQ(cfg.stride(), 64u);
  cfg.alignment = 4096;
  cfg.object_size = 4097;
  EXPECT_EQ(cfg.stride(), 8192u);
}

TEST(PoolConfig, RejectsBadValues) {
  auto expect_invalid = [](PoolConfig cfg) {
    try {
      cfg.validate();
      ADD_FAILURE() << "expected invalid_config";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_config);
    }
  };
  PoolConfig base;
  base.capacity = 1024;
  base.max_threads = 1;

  auto c = base;
  c.object_size = 7;
  expect_invalid(c);
  c = base;
  c.alignment = 32;
  expect_invalid(c);
  c = base;
  c.alignment = 96;
  expect_invalid(c);
  c = base;
  c.refill_batch = 0;
  expect_invalid(c);
  c = base;
  c.flush_batch = c.cache_capacity + 1;
  expect_invalid(c);
  c = base;
  c.max_threads = 3;  // 3 * 512 > 1024
  expect_invalid(c);
  c = base;
  c.capacity = 0;
  expect_invalid(c);
}

TEST(PoolConfig, WithCacheDerivesHalfBatches) {
  PoolConfig cfg;
  cfg.with_cache(8);
  EXPECT_EQ(cfg.refill_batch, 4u);
  EXPECT_EQ(cfg.flush_batch, 4u);
  cfg.with_cache(1);
  EXPECT_EQ(cfg.refill_batch, 1u);
}

TEST(RegionSizing, RoundsToTwoMegabytesForHugePolicies) {
  PoolConfig cfg;
  cfg.capacity = 1'000'000;
  cfg.object_size = 256;
  cfg.huge_policy = HugePolicy::AdviseHuge;
  EXPECT_EQ(region_bytes_for(cfg) % kHugePageSize, 0u);
  EXPECT_GE(region_bytes_for(cfg), 256'000'000u);
  EXPECT_LT(region_bytes_for(cfg), 256'000'000u + kHugePageSize);
  cfg.huge_policy = HugePolicy::PlainPages;
  EXPECT_EQ(region_bytes_for(cfg), 256'000'000u);
}

TEST(HugePolicy, ParsesNames) {
  EXPECT_EQ(parse_huge_policy("plain"), HugePolicy::PlainPages);
  EXPECT_EQ(parse_huge_policy("advise"), HugePolicy::AdviseHuge);
  EXPECT_EQ(parse_huge_policy("require"), HugePolicy::RequireHuge);
  EXPECT_THROW(parse_huge_policy("always"), Error);
}

}  // namespace
}  // namespace turbomem
