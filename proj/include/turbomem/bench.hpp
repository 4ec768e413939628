#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#if defined(__linux__)
#include <sys/utsname.h>
#endif

#include "turbomem/affinity.hpp"
#include "turbomem/config.hpp"
#include "turbomem/counters.hpp"
#include "turbomem/handler.hpp"
#include "turbomem/memory_region.hpp"

namespace turbomem {

enum class PinMode { Strict, Soft, Off };

constexpr std::string_view to_string(PinMode m) noexcept {
  switch (m) {
    case PinMode::Strict: return "strict";
    case PinMode::Soft: return "soft";
    case PinMode::Off: return "off";
  }
  return "off";
}

inline PinMode parse_pin_mode(std::string_view s) {
  if (s == "strict") return PinMode::Strict;
  if (s == "soft") return PinMode::Soft;
  if (s == "off") return PinMode::Off;
  throw Error(Errc::invalid_config, "unknown pin mode '" + std::string(s) + "'");
}

struct BenchConfig {
  HandlerKind handler = HandlerKind::TurboMem;
  std::size_t threads = 4;
  double duration_s = 5.0;
  // When set, each worker runs exactly this many measured ops instead of
  // running for duration_s.
  std::optional<std::uint64_t> ops_per_thread;
  std::size_t object_size = 256;
  std::size_t capacity = 1'000'000;
  std::size_t cache_capacity = 512;
  std::size_t refill_batch = 256;
  std::size_t flush_batch = 256;
  HugePolicy huge_policy = HugePolicy::AdviseHuge;
  PinMode pin = PinMode::Soft;
  std::size_t descriptor_bytes = 128;
  bool imix = false;
  std::vector<std::string> events;
  std::uint64_t seed = 1;
  std::size_t repetitions = 5;
  bool audit = false;
  // Packets each worker holds between RX (alloc) and TX (free).
  std::size_t inflight = 32;
  // Lower bound on warm-up ops per worker; warm-up also lasts at least 10%
  // of duration_s.
  std::uint64_t warmup_ops = 1'000'000;
  std::optional<int> numa_node;

  PoolConfig pool_config() const {
    PoolConfig pc;
    pc.object_size = object_size;
    pc.capacity = capacity;
    pc.cache_capacity = cache_capacity;
    pc.refill_batch = refill_batch;
    pc.flush_batch = flush_batch;
    pc.huge_policy = huge_policy;
    pc.numa_node = numa_node;
    pc.max_threads = threads;
    pc.audit = audit;
    return pc;
  }

  void validate() const {
    if (threads == 0) throw Error(Errc::invalid_config, "threads must be >= 1");
    if (repetitions == 0) throw Error(Errc::invalid_config, "repetitions must be >= 1");
    if (descriptor_bytes > object_size) throw Error(Errc::invalid_config, "descriptor_bytes > object_size");
    if (!ops_per_thread && !(duration_s > 0)) throw Error(Errc::invalid_config, "duration must be positive");
    pool_config().validate();
    const std::size_t per_worker = inflight + 1 + (handler == HandlerKind::TurboMem ? cache_capacity : 0);
    if (threads * per_worker > capacity)
      throw Error(Errc::invalid_config, "capacity cannot cover threads x (inflight + cache)");
    for (const auto& e : events)
      if (std::find(known_events().begin(), known_events().end(), e) == known_events().end())
        throw Error(Errc::unknown_event, e);
  }

  friend bool operator==(const BenchConfig&, const BenchConfig&) = default;
};

using MetricMap = std::map<std::string, std::optional<double>>;

struct RunRecord {
  double seconds = 0;
  std::uint64_t ops = 0;
  double mops = 0;
  std::uint64_t drops = 0;
  MetricMap counters_per_op;
  std::uint64_t cas_retries = 0;
  std::uint64_t global_push_ops = 0;
  std::uint64_t global_pop_ops = 0;
  std::optional<double> huge_fraction;
  std::string pin;
  bool audit_pass = false;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct HostFingerprint {
  std::string kernel;
  std::string cpu_model;
  std::size_t cores = 0;
  std::size_t nodes = 0;
  std::string thp_mode;
  std::optional<int> perf_event_paranoid;

  friend bool operator==(const HostFingerprint&, const HostFingerprint&) = default;
};

inline constexpr int kReportSchemaVersion = 1;

struct BenchReport {
  int schema_version = kReportSchemaVersion;
  BenchConfig config;
  HostFingerprint host;
  std::vector<RunRecord> runs;
  double median_mops = 0;
  double min_mops = 0;
  double max_mops = 0;
  MetricMap median_counters_per_op;
  // Derived from stalled-cycles-backend / cycles when both are counted.
  std::optional<double> memory_bound_fraction;
  // No portable source; always null.
  std::optional<double> dram_latency_ns;
  std::string status = "PASS";
  std::string error;

  bool passed() const noexcept { return status == "PASS"; }

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

inline HostFingerprint host_fingerprint() {
  HostFingerprint h;
#if defined(__linux__)
  utsname u{};
  if (::uname(&u) == 0) h.kernel = std::string(u.sysname) + " " + u.release;
#endif
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) h.cpu_model = line.substr(std::min(line.size(), colon + 2));
      break;
    }
  }
  const Topology topo = enumerate_topology();
  h.cores = topo.cores.size();
  h.nodes = topo.nodes.size();
  h.thp_mode = thp_mode();
  std::ifstream paranoid("/proc/sys/kernel/perf_event_paranoid");
  int v = 0;
  if (paranoid >> v) h.perf_event_paranoid = v;
  return h;
}

// Descriptor bytes written per op for one worker. IMIX draws 64/576/1500
// with weights 7:4:1, each capped at object_size. Depends only on config
// and worker index.
inline std::vector<std::size_t> descriptor_schedule(const BenchConfig& cfg, std::size_t worker, std::size_t n) {
  std::vector<std::size_t> out(n, cfg.descriptor_bytes);
  if (!cfg.imix) return out;
  std::mt19937_64 rng(cfg.seed * 0x9E37'79B9'7F4A'7C15ull + worker);
  std::discrete_distribution<int> pick({7.0, 4.0, 1.0});
  constexpr std::array<std::size_t, 3> sizes{64, 576, 1500};
  for (auto& s : out) s = std::min(sizes[static_cast<std::size_t>(pick(rng))], cfg.object_size);
  return out;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

namespace detail {

inline constexpr std::size_t kScheduleLength = 4096;

struct WorkerResult {
  std::uint64_t ops = 0;
  std::uint64_t drops = 0;
  std::chrono::steady_clock::time_point end;
  PinOutcome pin = PinOutcome::Unpinned;
  CounterReadings counters;
};

template <SlotHandler H>
RunRecord run_once(const BenchConfig& cfg, const Topology& topo) {
  using clock = std::chrono::steady_clock;
  const PoolConfig pc = cfg.pool_config();

  MemoryRegion region = reserve_region(region_bytes_for(pc), pc.alignment, pc.huge_policy, cfg.numa_node);
  advise_huge(region);
  touch_pages(region, cfg.numa_node);

  RunRecord rec;
  if (auto cov = inspect_huge_coverage(region)) rec.huge_fraction = cov->fraction();

  H pool(pc, region);
  std::vector<int> cores = cfg.numa_node ? topo.cores_of(*cfg.numa_node) : topo.cores;
  if (cores.empty()) cores = topo.cores;

  std::vector<WorkerResult> results(cfg.threads);
  std::atomic<bool> stop{false};
  std::atomic<bool> started{false};
  clock::time_point t0;
  PoolStats before;
  std::barrier sync(static_cast<std::ptrdiff_t>(cfg.threads), [&]() noexcept {
    before = pool.stats();
    t0 = clock::now();
    started.store(true, std::memory_order_release);
    started.notify_all();
  });

  const auto warmup_time = std::chrono::duration<double>(cfg.ops_per_thread ? 0.0 : cfg.duration_s * 0.1);

  auto worker = [&](std::size_t w) {
    WorkerResult& res = results[w];
    if (cfg.pin != PinMode::Off) res.pin = pin_current_thread(cores[w % cores.size()], topo);
    auto handle = pool.register_thread();
    const auto schedule = descriptor_schedule(cfg, w, kScheduleLength);
    std::optional<CounterSet> counters;
    if (!cfg.events.empty()) counters.emplace(cfg.events);

    std::vector<SlotIndex> ring(cfg.inflight + 1);
    std::size_t ring_head = 0, ring_size = 0;
    std::uint64_t op = 0;

    // RX: alloc and fill a descriptor; TX: free the oldest packet once the
    // in-flight window is full.
    auto step = [&]() {
      auto s = pool.try_alloc(handle);
      if (!s) {
        ++res.drops;
      } else {
        std::memset(pool.slot_address(*s), static_cast<int>(op & 0xFF), schedule[op % kScheduleLength]);
        ring[(ring_head + ring_size) % ring.size()] = *s;
        ++ring_size;
      }
      if (ring_size > cfg.inflight || (!s && ring_size)) {
        pool.free(handle, ring[ring_head]);
        ring_head = (ring_head + 1) % ring.size();
        --ring_size;
      }
      ++op;
    };

    const auto warm_start = clock::now();
    while (op < cfg.warmup_ops || clock::now() - warm_start < warmup_time) step();
    res.drops = 0;

    sync.arrive_and_wait();
    if (counters) counters->start();
    const std::uint64_t first = op;
    if (cfg.ops_per_thread) {
      for (std::uint64_t i = 0; i < *cfg.ops_per_thread; ++i) step();
    } else {
      while (!stop.load(std::memory_order_relaxed))
        for (int i = 0; i < 256; ++i) step();
    }
    res.end = clock::now();
    if (counters) res.counters = counters->stop();
    res.ops = op - first;

    while (ring_size) {
      pool.free(handle, ring[ring_head]);
      ring_head = (ring_head + 1) % ring.size();
      --ring_size;
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(cfg.threads);
  for (std::size_t w = 0; w < cfg.threads; ++w) threads.emplace_back(worker, w);
  if (!cfg.ops_per_thread) {
    started.wait(false, std::memory_order_acquire);
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_s));
    stop.store(true, std::memory_order_relaxed);
  }
  for (auto& t : threads) t.join();

  clock::time_point end = t0;
  for (const auto& r : results) {
    end = std::max(end, r.end);
    rec.ops += r.ops;
    rec.drops += r.drops;
  }
  rec.seconds = std::chrono::duration<double>(end - t0).count();
  rec.mops = rec.seconds > 0 ? static_cast<double>(rec.ops) / rec.seconds / 1e6 : 0.0;

  const PoolStats after = pool.stats();
  rec.cas_retries = after.cas_retries - before.cas_retries;
  rec.global_push_ops = after.global_push_ops - before.global_push_ops;
  rec.global_pop_ops = after.global_pop_ops - before.global_pop_ops;

  for (const auto& ev : cfg.events) {
    std::optional<double> total = 0.0;
    for (const auto& r : results) {
      auto it = r.counters.find(ev);
      if (it == r.counters.end() || !it->second) {
        total.reset();
        break;
      }
      *total += static_cast<double>(*it->second);
    }
    if (total && rec.ops) *total /= static_cast<double>(rec.ops);
    rec.counters_per_op[ev] = rec.ops ? total : std::nullopt;
  }

  bool all_pinned = cfg.pin != PinMode::Off;
  for (const auto& r : results) all_pinned &= r.pin == PinOutcome::Pinned;
  rec.pin = cfg.pin == PinMode::Off ? "off" : all_pinned ? "pinned" : "unpinned";

  const AuditReport audit = pool.audit();
  rec.audit_pass = audit.ok && after.total_allocated == 0 && after.global_free + after.cached_total() == pc.capacity;

  if (cfg.pin == PinMode::Strict && !all_pinned) throw Error(Errc::invalid_core, "strict pinning failed");
  return rec;
}

}  // namespace detail

// Runs `repetitions` fresh pools of the forwarding loop and aggregates.
// Failures after validation are captured in the report, never thrown.
inline BenchReport run_forwarding_bench(const BenchConfig& cfg) {
  BenchReport rep;
  rep.config = cfg;
  rep.host = host_fingerprint();
  try {
    cfg.validate();
    const Topology topo = enumerate_topology();
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      RunRecord rec = visit_handler(cfg.handler, [&]<class H>() { return detail::run_once<H>(cfg, topo); });
      if (!rec.audit_pass) {
        rep.status = "FAILED";
        rep.error = "conservation audit failed in run " + std::to_string(r);
      }
      rep.runs.push_back(std::move(rec));
    }
  } catch (const std::exception& e) {
    rep.status = "FAILED";
    rep.error = e.what();
  }

  std::vector<double> mops;
  for (const auto& r : rep.runs) mops.push_back(r.mops);
  if (!mops.empty()) {
    rep.median_mops = median_of(mops);
    rep.min_mops = *std::min_element(mops.begin(), mops.end());
    rep.max_mops = *std::max_element(mops.begin(), mops.end());
  }

  auto median_metric = [&](auto&& per_run) -> std::optional<double> {
    std::vector<double> v;
    for (const auto& r : rep.runs) {
      const std::optional<double> x = per_run(r);
      if (!x) return std::nullopt;
      v.push_back(*x);
    }
    if (v.empty()) return std::nullopt;
    return median_of(std::move(v));
  };
  for (const auto& ev : cfg.events) {
    rep.median_counters_per_op[ev] = median_metric([&](const RunRecord& r) -> std::optional<double> {
      auto it = r.counters_per_op.find(ev);
      return it == r.counters_per_op.end() ? std::nullopt : it->second;
    });
  }
  rep.memory_bound_fraction = median_metric([](const RunRecord& r) -> std::optional<double> {
    auto stalled = r.counters_per_op.find("stalled-cycles-backend");
    auto cycles = r.counters_per_op.find("cycles");
    if (stalled == r.counters_per_op.end() || cycles == r.counters_per_op.end() || !stalled->second ||
        !cycles->second || *cycles->second <= 0)
      return std::nullopt;
    return *stalled->second / *cycles->second;
  });
  return rep;
}

// One axis of a benchmark matrix: a config knob name and its values.
struct MatrixAxis {
  std::string name;
  std::vector<std::string> values;
};

inline void apply_axis(BenchConfig& cfg, std::string_view name, const std::string& value) {
  auto to_size = [&] {
    try {
      return static_cast<std::size_t>(std::stoull(value));
    } catch (const std::exception&) {
      throw Error(Errc::invalid_config, "axis " + std::string(name) + ": bad number '" + value + "'");
    }
  };
  if (name == "handler") {
    cfg.handler = parse_handler(value);
  } else if (name == "huge") {
    cfg.huge_policy = parse_huge_policy(value);
  } else if (name == "threads") {
    cfg.threads = to_size();
  } else if (name == "cache") {
    cfg.cache_capacity = to_size();
    cfg.refill_batch = cfg.flush_batch = std::max<std::size_t>(1, cfg.cache_capacity / 2);
  } else if (name == "object-size") {
    cfg.object_size = to_size();
  } else if (name == "descriptor-bytes") {
    cfg.descriptor_bytes = to_size();
  } else if (name == "pin") {
    cfg.pin = parse_pin_mode(value);
  } else {
    throw Error(Errc::invalid_config, "unknown matrix axis '" + std::string(name) + "'");
  }
}

// Parses "handler=turbomem,locked-ring;huge=plain,advise".
inline std::vector<MatrixAxis> parse_matrix_spec(std::string_view spec) {
  std::vector<MatrixAxis> axes;
  while (!spec.empty()) {
    const auto semi = spec.find(';');
    const std::string_view part = spec.substr(0, semi);
    spec = semi == std::string_view::npos ? std::string_view{} : spec.substr(semi + 1);
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos || eq == 0) throw Error(Errc::parse_error, "matrix axis needs name=values");
    MatrixAxis axis{std::string(part.substr(0, eq)), {}};
    std::string_view vals = part.substr(eq + 1);
    while (!vals.empty()) {
      const auto comma = vals.find(',');
      if (auto v = vals.substr(0, comma); !v.empty()) axis.values.emplace_back(v);
      vals = comma == std::string_view::npos ? std::string_view{} : vals.substr(comma + 1);
    }
    if (axis.values.empty()) throw Error(Errc::parse_error, "matrix axis '" + axis.name + "' has no values");
    axes.push_back(std::move(axis));
  }
  return axes;
}

// Cartesian product of the axes over `base`, last axis varying fastest.
inline std::vector<BenchConfig> expand_matrix(const BenchConfig& base, const std::vector<MatrixAxis>& axes) {
  std::vector<BenchConfig> cells{base};
  for (const auto& axis : axes) {
    std::vector<BenchConfig> next;
    next.reserve(cells.size() * axis.values.size());
    for (const auto& c : cells)
      for (const auto& v : axis.values) {
        BenchConfig cell = c;
        apply_axis(cell, axis.name, v);
        next.push_back(std::move(cell));
      }
    cells = std::move(next);
  }
  return cells;
}

template <class Runner = BenchReport (*)(const BenchConfig&)>
std::vector<BenchReport> run_matrix(const BenchConfig& base, const std::vector<MatrixAxis>& axes,
                                    Runner&& runner = run_forwarding_bench) {
  std::vector<BenchReport> reports;
  for (const auto& cell : expand_matrix(base, axes)) reports.push_back(runner(cell));
  return reports;
}

}  // namespace turbomem
