// Two workers pass packet objects through a shared pool and report the
// pool's counters at the end.

#include <cstdio>
#include <cstring>
#include <thread>
#include <vector>

#include "turbomem/turbomem.hpp"

using namespace turbomem;

struct Packet {
  std::uint32_t flow;
  std::uint16_t length;
  unsigned char payload[250];
};

int main() {
  auto cfg = ObjectPool<Packet>::config_for(65536);
  cfg.max_threads = 2;
  cfg.with_cache(256);

  auto region = reserve_region(region_bytes_for(cfg), cfg.alignment, cfg.huge_policy);
  const auto advice = advise_huge(region);
  touch_pages(region);

  Pool pool(cfg, region);
  ObjectPool<Packet> packets(pool);

  std::vector<std::thread> workers;
  for (std::uint32_t w = 0; w < 2; ++w) {
    workers.emplace_back([&, w] {
      auto h = pool.register_thread();
      std::vector<Packet*> burst;
      for (int round = 0; round < 10000; ++round) {
        for (int i = 0; i < 32; ++i) {
          Packet* p = packets.create(h, Packet{w, 64, {}});
          std::memset(p->payload, i, p->length);
          burst.push_back(p);
        }
        for (Packet* p : burst) packets.destroy(h, p);
        burst.clear();
      }
    });
  }
  for (auto& t : workers) t.join();

  const auto st = pool.stats();
  const auto cov = inspect_huge_coverage(region);
  std::printf("slots %zu, free %zu, cached %zu, allocated %zu\n", st.capacity, st.global_free, st.cached_total(),
              st.total_allocated);
  std::printf("global pops %llu, pushes %llu, CAS retries %llu\n", static_cast<unsigned long long>(st.global_pop_ops),
              static_cast<unsigned long long>(st.global_push_ops), static_cast<unsigned long long>(st.cas_retries));
  std::printf("huge-page advice %s, coverage %s\n", advice == AdviceOutcome::Advised ? "accepted" : "not applied",
              cov ? std::to_string(cov->fraction()).c_str() : "unknown");
  const auto audit = pool.audit();
  std::printf("audit %s\n", audit.ok ? "ok" : audit.detail.c_str());
  return audit.ok ? 0 : 1;
}
