#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#if defined(__linux__)
#include <sys/mman.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

#include "turbomem/affinity.hpp"
#include "turbomem/config.hpp"
#include "turbomem/error.hpp"

namespace turbomem {

enum class PageKind { Unknown, Base4K, Huge2M, Mixed };
enum class AdviceOutcome { Advised, Unsupported, NotApplicable };
enum class NumaPlacement { None, Bound, FirstTouch };

constexpr std::string_view to_string(PageKind k) noexcept {
  switch (k) {
    case PageKind::Unknown: return "unknown";
    case PageKind::Base4K: return "4k";
    case PageKind::Huge2M: return "2m";
    case PageKind::Mixed: return "mixed";
  }
  return "unknown";
}

struct HugeCoverage {
  std::size_t huge_bytes = 0;
  std::size_t total_bytes = 0;

  double fraction() const noexcept {
    return total_bytes == 0 ? 0.0 : static_cast<double>(huge_bytes) / static_cast<double>(total_bytes);
  }
};

// Every OS facility the region code touches goes through this interface so
// tests can swap in a fake.
class MemoryBackend {
 public:
  virtual ~MemoryBackend() = default;

  // Anonymous private mapping of `length` bytes whose base is a multiple of
  // `alignment`; nullptr on failure.
  virtual void* map_aligned(std::size_t length, std::size_t alignment) = 0;
  virtual void unmap(void* addr, std::size_t length) noexcept = 0;
  // False when the host has no transparent huge page facility.
  virtual bool advise_huge(void* addr, std::size_t length) = 0;
  virtual void advise_no_huge(void* addr, std::size_t length) = 0;
  virtual bool thp_available() = 0;
  virtual bool node_exists(int node) = 0;
  // False when node binding is unavailable.
  virtual bool bind_node(void* addr, std::size_t length, int node) = 0;
  virtual std::optional<std::size_t> anon_huge_bytes(const void* addr, std::size_t length) = 0;
  virtual std::optional<std::size_t> resident_bytes(const void* addr, std::size_t length) = 0;
  // Node of every `step`-th byte offset's page; nullopt when unavailable.
  virtual std::optional<std::vector<int>> page_nodes(const void* addr, std::size_t length, std::size_t step) = 0;
};

#if defined(__linux__)

inline std::string thp_mode(const std::filesystem::path& knob = "/sys/kernel/mm/transparent_hugepage/enabled") {
  const std::string line = detail::read_first_line(knob);
  const auto open = line.find('[');
  const auto close = line.find(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return {};
  return line.substr(open + 1, close - open - 1);
}

class LinuxBackend final : public MemoryBackend {
 public:
  // Over-maps by `alignment` and trims the misaligned head and tail.
  void* map_aligned(std::size_t length, std::size_t alignment) override {
    const std::size_t page = page_size();
    length = round_up(length, page);
    alignment = std::max(alignment, page);
    const std::size_t span = length + alignment;
    void* raw = ::mmap(nullptr, span, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (raw == MAP_FAILED) return nullptr;
    const auto start = reinterpret_cast<std::uintptr_t>(raw);
    const std::uintptr_t aligned = (start + alignment - 1) & ~(std::uintptr_t{alignment} - 1);
    const std::size_t head = aligned - start;
    const std::size_t tail = span - head - length;
    if (head) ::munmap(raw, head);
    if (tail) ::munmap(reinterpret_cast<void*>(aligned + length), tail);
    return reinterpret_cast<void*>(aligned);
  }

  void unmap(void* addr, std::size_t length) noexcept override { ::munmap(addr, round_up(length, page_size())); }

  bool advise_huge(void* addr, std::size_t length) override {
    if (!thp_available()) return false;
#ifdef MADV_HUGEPAGE
    return ::madvise(addr, round_up(length, page_size()), MADV_HUGEPAGE) == 0;
#else
    return false;
#endif
  }

  void advise_no_huge(void* addr, std::size_t length) override {
#ifdef MADV_NOHUGEPAGE
    ::madvise(addr, round_up(length, page_size()), MADV_NOHUGEPAGE);
#endif
  }

  bool thp_available() override {
    const std::string mode = thp_mode();
    return mode == "always" || mode == "madvise";
  }

  bool node_exists(int node) override {
    if (node < 0) return false;
    std::error_code ec;
    if (!std::filesystem::exists("/sys/devices/system/node", ec)) return node == 0;
    return std::filesystem::exists("/sys/devices/system/node/node" + std::to_string(node), ec);
  }

  bool bind_node(void* addr, std::size_t length, int node) override {
#ifdef SYS_mbind
    constexpr int kMpolBind = 2;
    constexpr std::size_t kBits = sizeof(unsigned long) * 8;
    if (node < 0 || static_cast<std::size_t>(node) >= kBits * 16) return false;
    unsigned long mask[16] = {};
    mask[node / kBits] = 1UL << (node % kBits);
    return ::syscall(SYS_mbind, addr, round_up(length, page_size()), kMpolBind, mask, kBits * 16, 0) == 0;
#else
    return false;
#endif
  }

  // Sums AnonHugePages of every /proc/self/smaps mapping overlapping the
  // range, clipped to the overlap.
  std::optional<std::size_t> anon_huge_bytes(const void* addr, std::size_t length) override {
    std::ifstream smaps("/proc/self/smaps");
    if (!smaps) return std::nullopt;
    const auto lo = reinterpret_cast<std::uintptr_t>(addr);
    const auto hi = lo + length;
    std::size_t total = 0;
    std::size_t overlap = 0;
    bool saw_field = false;
    std::string line;
    while (std::getline(smaps, line)) {
      unsigned long start = 0, end = 0;
      char dash = 0;
      if (!line.empty() && std::isxdigit(static_cast<unsigned char>(line[0])) &&
          std::sscanf(line.c_str(), "%lx%c%lx", &start, &dash, &end) == 3 && dash == '-') {
        const auto s = std::max<std::uintptr_t>(start, lo);
        const auto e = std::min<std::uintptr_t>(end, hi);
        overlap = s < e ? e - s : 0;
        continue;
      }
      if (line.rfind("AnonHugePages:", 0) == 0) {
        saw_field = true;
        if (overlap == 0) continue;
        const std::size_t kb = std::strtoull(line.c_str() + 14, nullptr, 10);
        total += std::min(kb * 1024, overlap);
      }
    }
    if (!saw_field) return std::nullopt;
    return total;
  }

  std::optional<std::size_t> resident_bytes(const void* addr, std::size_t length) override {
    const std::size_t page = page_size();
    const std::size_t pages = round_up(length, page) / page;
    std::vector<unsigned char> vec(pages);
    if (::mincore(const_cast<void*>(addr), length, vec.data()) != 0) return std::nullopt;
    std::size_t n = 0;
    for (unsigned char v : vec) n += v & 1u;
    return n * page;
  }

  std::optional<std::vector<int>> page_nodes(const void* addr, std::size_t length, std::size_t step) override {
#ifdef SYS_move_pages
    step = std::max(step, page_size());
    std::vector<void*> pages;
    for (std::size_t off = 0; off < length; off += step)
      pages.push_back(const_cast<std::byte*>(static_cast<const std::byte*>(addr)) + off);
    std::vector<int> status(pages.size(), -1);
    if (::syscall(SYS_move_pages, 0, pages.size(), pages.data(), nullptr, status.data(), 0) != 0) return std::nullopt;
    return status;
#else
    return std::nullopt;
#endif
  }

  static std::size_t page_size() noexcept {
    static const std::size_t p = static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
    return p;
  }
};

inline MemoryBackend& default_backend() {
  static LinuxBackend backend;
  return backend;
}

#else

inline std::string thp_mode() { return {}; }

// Heap-backed fallback: no advice, no introspection, no binding.
class PortableBackend final : public MemoryBackend {
 public:
  void* map_aligned(std::size_t length, std::size_t alignment) override {
    void* p = std::aligned_alloc(std::max(alignment, kBasePageSize), round_up(length, std::max(alignment, kBasePageSize)));
    if (p) std::memset(p, 0, length);
    return p;
  }
  void unmap(void* addr, std::size_t) noexcept override { std::free(addr); }
  bool advise_huge(void*, std::size_t) override { return false; }
  void advise_no_huge(void*, std::size_t) override {}
  bool thp_available() override { return false; }
  bool node_exists(int node) override { return node == 0; }
  bool bind_node(void*, std::size_t, int) override { return false; }
  std::optional<std::size_t> anon_huge_bytes(const void*, std::size_t) override { return std::nullopt; }
  std::optional<std::size_t> resident_bytes(const void*, std::size_t) override { return std::nullopt; }
  std::optional<std::vector<int>> page_nodes(const void*, std::size_t, std::size_t) override { return std::nullopt; }
};

inline MemoryBackend& default_backend() {
  static PortableBackend backend;
  return backend;
}

#endif

// One contiguous anonymous region. Owns the mapping until released.
class MemoryRegion {
 public:
  MemoryRegion(MemoryBackend& backend, std::byte* base, std::size_t length, HugePolicy policy,
               std::optional<int> node, NumaPlacement placement) noexcept
      : backend_(&backend), base_(base), length_(length), policy_(policy), node_(node), placement_(placement) {}

  MemoryRegion(MemoryRegion&& o) noexcept
      : backend_(o.backend_), base_(std::exchange(o.base_, nullptr)), length_(o.length_), policy_(o.policy_),
        node_(o.node_), placement_(o.placement_) {}

  MemoryRegion& operator=(MemoryRegion&& o) noexcept {
    if (this != &o) {
      unmap();
      backend_ = o.backend_;
      base_ = std::exchange(o.base_, nullptr);
      length_ = o.length_;
      policy_ = o.policy_;
      node_ = o.node_;
      placement_ = o.placement_;
    }
    return *this;
  }

  MemoryRegion(const MemoryRegion&) = delete;
  MemoryRegion& operator=(const MemoryRegion&) = delete;
  ~MemoryRegion() { unmap(); }

  std::byte* base() const noexcept { return base_; }
  std::size_t length() const noexcept { return length_; }
  std::span<std::byte> bytes() const noexcept { return {base_, base_ ? length_ : 0}; }
  HugePolicy policy() const noexcept { return policy_; }
  std::optional<int> numa_node() const noexcept { return node_; }
  NumaPlacement placement() const noexcept { return placement_; }
  bool released() const noexcept { return base_ == nullptr; }
  MemoryBackend& backend() const noexcept { return *backend_; }

  void release() {
    if (released()) throw Error(Errc::released, "region already released");
    unmap();
  }

 private:
  void unmap() noexcept {
    if (base_) backend_->unmap(base_, length_);
    base_ = nullptr;
  }

  MemoryBackend* backend_;
  std::byte* base_;
  std::size_t length_;
  HugePolicy policy_;
  std::optional<int> node_;
  NumaPlacement placement_;
};

// Maps `length` bytes (rounded up to the base page size). Huge-page
// policies force a 2 MB aligned base. PlainPages regions are explicitly
// opted out of huge pages so the control stays on 4 KB pages even when
// the host runs THP in "always" mode.
inline MemoryRegion reserve_region(std::size_t length, std::size_t alignment, HugePolicy policy,
                                   std::optional<int> numa_node = std::nullopt,
                                   MemoryBackend& backend = default_backend()) {
  if (length == 0) throw Error(Errc::invalid_config, "region length must be positive");
  if (!std::has_single_bit(alignment)) throw Error(Errc::invalid_config, "alignment must be a power of two");
  if (policy == HugePolicy::RequireHuge && !backend.thp_available())
    throw Error(Errc::huge_pages_unsupported, "RequireHuge on a host without transparent huge pages");
  if (numa_node && !backend.node_exists(*numa_node))
    throw Error(Errc::numa_unsupported, "node " + std::to_string(*numa_node) + " does not exist");

  length = round_up(length, kBasePageSize);
  const std::size_t base_align = policy == HugePolicy::PlainPages ? alignment : std::max(alignment, kHugePageSize);
  void* p = backend.map_aligned(length, base_align);
  if (!p) throw Error(Errc::out_of_memory, std::to_string(length) + " bytes");
  if (policy == HugePolicy::PlainPages) backend.advise_no_huge(p, length);

  NumaPlacement placement = NumaPlacement::None;
  if (numa_node) placement = backend.bind_node(p, length, *numa_node) ? NumaPlacement::Bound : NumaPlacement::FirstTouch;
  return MemoryRegion(backend, static_cast<std::byte*>(p), length, policy, numa_node, placement);
}

inline AdviceOutcome advise_huge(MemoryRegion& region) {
  if (region.released()) throw Error(Errc::released);
  if (region.policy() == HugePolicy::PlainPages) return AdviceOutcome::NotApplicable;
  if (region.backend().advise_huge(region.base(), region.length())) return AdviceOutcome::Advised;
  if (region.policy() == HugePolicy::RequireHuge)
    throw Error(Errc::huge_pages_unsupported, "huge page advice rejected under RequireHuge");
  return AdviceOutcome::Unsupported;
}

namespace detail {

inline void touch_range(std::byte* base, std::size_t length) noexcept {
  auto* p = reinterpret_cast<volatile unsigned char*>(base);
  for (std::size_t off = 0; off < length; off += kBasePageSize) p[off] = p[off];
}

}  // namespace detail

// Faults every page in with a sequential content-preserving write. With a
// node, the touching thread is pinned to one of that node's cores first so
// first-touch placement lands there. Must not race with pool traffic.
inline void touch_pages(MemoryRegion& region, std::optional<int> numa_node = std::nullopt) {
  if (region.released()) throw Error(Errc::released);
  if (!numa_node) {
    detail::touch_range(region.base(), region.length());
    return;
  }
  std::thread toucher([&] {
    const Topology topo = enumerate_topology();
    const auto cores = topo.cores_of(*numa_node);
    if (!cores.empty()) pin_current_thread(cores.front(), topo);
    detail::touch_range(region.base(), region.length());
  });
  toucher.join();
}

inline std::optional<HugeCoverage> inspect_huge_coverage(const MemoryRegion& region) {
  if (region.released()) throw Error(Errc::released);
  const auto huge = region.backend().anon_huge_bytes(region.base(), region.length());
  if (!huge) return std::nullopt;
  return HugeCoverage{std::min(*huge, region.length()), region.length()};
}

inline PageKind achieved_page_kind(const MemoryRegion& region) {
  const auto cov = inspect_huge_coverage(region);
  if (!cov) return PageKind::Unknown;
  if (cov->huge_bytes == 0) return PageKind::Base4K;
  if (cov->huge_bytes == cov->total_bytes) return PageKind::Huge2M;
  return PageKind::Mixed;
}

inline void release_region(MemoryRegion& region) { region.release(); }

}  // namespace turbomem
