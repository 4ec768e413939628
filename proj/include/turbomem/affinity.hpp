#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "turbomem/error.hpp"

namespace turbomem {

struct Topology {
  std::vector<int> cores;
  std::map<int, int> node_of_core;
  std::vector<int> nodes;

  int node_of(int core) const {
    auto it = node_of_core.find(core);
    if (it == node_of_core.end()) throw Error(Errc::invalid_core, std::to_string(core));
    return it->second;
  }

  std::vector<int> cores_of(int node) const {
    std::vector<int> out;
    for (auto [core, n] : node_of_core)
      if (n == node) out.push_back(core);
    return out;
  }

  bool has_core(int core) const { return node_of_core.contains(core); }
  bool has_node(int node) const { return std::find(nodes.begin(), nodes.end(), node) != nodes.end(); }
};

// Parses the kernel's cpulist format ("0-3,8,10-11"). Malformed tokens are
// skipped.
inline std::vector<int> parse_cpu_list(std::string_view text) {
  std::set<int> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view tok = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\n')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\n')) tok.remove_suffix(1);
    if (tok.empty()) continue;
    int lo = 0, hi = 0;
    const auto dash = tok.find('-');
    const auto lo_tok = tok.substr(0, dash);
    if (std::from_chars(lo_tok.data(), lo_tok.data() + lo_tok.size(), lo).ec != std::errc{}) continue;
    hi = lo;
    if (dash != std::string_view::npos) {
      const auto hi_tok = tok.substr(dash + 1);
      if (std::from_chars(hi_tok.data(), hi_tok.data() + hi_tok.size(), hi).ec != std::errc{}) continue;
    }
    for (int c = lo; c <= hi; ++c) out.insert(c);
  }
  return {out.begin(), out.end()};
}

namespace detail {

inline std::string read_first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

inline Topology single_node_fallback() {
  Topology t;
  const unsigned n = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned c = 0; c < n; ++c) {
    t.cores.push_back(static_cast<int>(c));
    t.node_of_core[static_cast<int>(c)] = 0;
  }
  t.nodes = {0};
  return t;
}

}  // namespace detail

// Reads online CPUs and node membership from a sysfs tree. Any missing
// piece degrades to a single node 0 holding every core.
inline Topology enumerate_topology(const std::filesystem::path& sysfs = "/sys/devices/system") {
  namespace fs = std::filesystem;
  std::error_code ec;
  const auto online = parse_cpu_list(detail::read_first_line(sysfs / "cpu" / "online"));
  if (online.empty()) return detail::single_node_fallback();

  Topology t;
  t.cores = online;
  for (const auto& entry : fs::directory_iterator(sysfs / "node", ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("node", 0) != 0) continue;
    int node = 0;
    if (std::from_chars(name.data() + 4, name.data() + name.size(), node).ec != std::errc{}) continue;
    for (int core : parse_cpu_list(detail::read_first_line(entry.path() / "cpulist"))) {
      if (std::binary_search(online.begin(), online.end(), core)) t.node_of_core.emplace(core, node);
    }
  }
  // Cores the node directories did not claim land on node 0.
  for (int core : t.cores) t.node_of_core.emplace(core, 0);
  std::set<int> nodes;
  for (auto [core, node] : t.node_of_core) nodes.insert(node);
  t.nodes.assign(nodes.begin(), nodes.end());
  return t;
}

enum class PinOutcome { Pinned, Unpinned };

constexpr std::string_view to_string(PinOutcome p) noexcept { return p == PinOutcome::Pinned ? "pinned" : "unpinned"; }

// Allowed-CPU set of the calling thread; empty when the OS cannot say.
inline std::vector<int> current_thread_affinity() {
  std::vector<int> out;
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  if (pthread_getaffinity_np(pthread_self(), sizeof(set), &set) != 0) return out;
  for (int c = 0; c < CPU_SETSIZE; ++c)
    if (CPU_ISSET(c, &set)) out.push_back(c);
#endif
  return out;
}

// Restricts the calling thread to `core_id`. Throws for a core the host
// does not have; privilege or platform failures come back as Unpinned.
inline PinOutcome pin_current_thread(int core_id, const Topology& topo) {
  if (!topo.has_core(core_id)) throw Error(Errc::invalid_core, std::to_string(core_id));
#if defined(__linux__)
  if (core_id >= CPU_SETSIZE) return PinOutcome::Unpinned;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core_id, &set);
  if (pthread_setaffinity_np(pthread_self(), sizeof(set), &set) != 0) return PinOutcome::Unpinned;
  return current_thread_affinity() == std::vector<int>{core_id} ? PinOutcome::Pinned : PinOutcome::Unpinned;
#else
  return PinOutcome::Unpinned;
#endif
}

inline PinOutcome pin_current_thread(int core_id) { return pin_current_thread(core_id, enumerate_topology()); }

// Restores the calling thread's original CPU set on scope exit.
class AffinityGuard {
 public:
  AffinityGuard() : saved_(current_thread_affinity()) {}
  AffinityGuard(const AffinityGuard&) = delete;
  AffinityGuard& operator=(const AffinityGuard&) = delete;
  ~AffinityGuard() {
#if defined(__linux__)
    if (saved_.empty()) return;
    cpu_set_t set;
    CPU_ZERO(&set);
    for (int c : saved_) CPU_SET(c, &set);
    pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
#endif
  }

 private:
  std::vector<int> saved_;
};

}  // namespace turbomem
