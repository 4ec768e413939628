#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace turbomem {

// Counters are read field by field with relaxed loads. They are only a
// consistent snapshot when no operation is in flight.
struct PoolStats {
  std::size_t capacity = 0;
  std::size_t global_free = 0;
  std::vector<std::size_t> per_thread_cached;  // indexed by registration id
  std::size_t total_allocated = 0;
  std::uint64_t global_push_ops = 0;
  std::uint64_t global_pop_ops = 0;
  std::uint64_t cas_retries = 0;

  std::size_t cached_total() const noexcept {
    return std::accumulate(per_thread_cached.begin(), per_thread_cached.end(), std::size_t{0});
  }

  bool conserved() const noexcept { return global_free + cached_total() + total_allocated == capacity; }
};

// Result of a quiescent structural walk over a handler's free storage.
struct AuditReport {
  bool ok = true;
  std::size_t walked_free = 0;   // nodes reachable from the global structure
  std::size_t cached = 0;        // slots held in thread caches
  std::size_t allocated = 0;     // slots held by callers per the counters
  std::uint64_t double_claims = 0;
  std::string detail;

  void fail(std::string why) {
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += std::move(why);
  }
};

}  // namespace turbomem
