#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "turbomem/error.hpp"

namespace turbomem {

inline constexpr std::size_t kCacheLine = 64;
inline constexpr std::size_t kBasePageSize = 4096;
inline constexpr std::size_t kHugePageSize = std::size_t{2} << 20;

enum class HugePolicy : std::uint8_t { PlainPages, AdviseHuge, RequireHuge };

constexpr std::string_view to_string(HugePolicy p) noexcept {
  switch (p) {
    case HugePolicy::PlainPages: return "plain";
    case HugePolicy::AdviseHuge: return "advise";
    case HugePolicy::RequireHuge: return "require";
  }
  return "plain";
}

inline HugePolicy parse_huge_policy(std::string_view s) {
  if (s == "plain") return HugePolicy::PlainPages;
  if (s == "advise") return HugePolicy::AdviseHuge;
  if (s == "require") return HugePolicy::RequireHuge;
  throw Error(Errc::invalid_config, "unknown huge policy '" + std::string(s) + "'");
}

constexpr std::size_t round_up(std::size_t value, std::size_t multiple) noexcept {
  return (value + multiple - 1) / multiple * multiple;
}

struct PoolConfig {
  std::size_t object_size = 256;
  std::size_t capacity = 1'000'000;
  std::size_t cache_capacity = 512;
  std::size_t refill_batch = 256;
  std::size_t flush_batch = 256;
  std::size_t alignment = kCacheLine;
  std::optional<int> numa_node;
  HugePolicy huge_policy = HugePolicy::AdviseHuge;
  std::size_t max_threads = 16;
  // Per-slot claim stamps; catches double frees and double claims.
  bool audit = false;

  // Sets the cache size and derives the half-capacity refill/flush batches.
  PoolConfig& with_cache(std::size_t n) noexcept {
    cache_capacity = n;
    refill_batch = flush_batch = std::max<std::size_t>(1, n / 2);
    return *this;
  }

  constexpr std::size_t stride() const noexcept { return round_up(object_size, alignment); }

  void validate() const {
    auto fail = [](std::string_view why) { throw Error(Errc::invalid_config, why); };
    if (object_size < sizeof(std::uint64_t)) fail("object_size must hold a free-list link (>= 8 bytes)");
    if (!std::has_single_bit(alignment) || alignment < kCacheLine)
      fail("alignment must be a power of two >= 64");
    if (capacity == 0) fail("capacity must be positive");
    if (capacity > std::size_t{0xFFFF'FFFE}) fail("capacity exceeds 32-bit slot index range");
    if (cache_capacity == 0) fail("cache_capacity must be positive");
    if (refill_batch == 0 || refill_batch > cache_capacity) fail("refill_batch must be in (0, cache_capacity]");
    if (flush_batch == 0 || flush_batch > cache_capacity) fail("flush_batch must be in (0, cache_capacity]");
    if (max_threads == 0) fail("max_threads must be positive");
    if (capacity < max_threads * cache_capacity) fail("capacity < max_threads * cache_capacity");
  }
};

// Backing bytes needed for a pool. Huge-page policies round to a 2 MB
// multiple so the tail stays promotable.
inline std::size_t region_bytes_for(const PoolConfig& cfg) noexcept {
  const std::size_t raw = cfg.capacity * cfg.stride();
  return round_up(raw, cfg.huge_policy == HugePolicy::PlainPages ? kBasePageSize : kHugePageSize);
}

}  // namespace turbomem
