#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#if defined(__linux__)
#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

#include "turbomem/error.hpp"

namespace turbomem {

// Symbolic event names accepted by CounterSet. Host encodings stay inside
// this header.
inline const std::vector<std::string_view>& known_events() {
  static const std::vector<std::string_view> names{
      "cycles",      "instructions", "dtlb-load-misses", "llc-references", "llc-misses",
      "stalled-cycles-backend", "task-clock", "page-faults"};
  return names;
}

using CounterReadings = std::map<std::string, std::optional<std::uint64_t>>;

// Counts the calling thread over [start, stop). Events the host cannot
// count are flagged unavailable and never carry a value.
class CounterSet {
 public:
  explicit CounterSet(std::vector<std::string> events) : events_(std::move(events)), fds_(events_.size(), -1) {
    for (std::size_t i = 0; i < events_.size(); ++i) fds_[i] = open_event(events_[i]);
  }

  CounterSet(CounterSet&& o) noexcept
      : events_(std::move(o.events_)), fds_(std::move(o.fds_)), running_(o.running_) {
    o.fds_.clear();
  }
  CounterSet(const CounterSet&) = delete;
  CounterSet& operator=(const CounterSet&) = delete;
  CounterSet& operator=(CounterSet&&) = delete;

  ~CounterSet() {
#if defined(__linux__)
    for (int fd : fds_)
      if (fd >= 0) ::close(fd);
#endif
  }

  const std::vector<std::string>& events() const noexcept { return events_; }

  bool available(std::string_view event) const {
    for (std::size_t i = 0; i < events_.size(); ++i)
      if (events_[i] == event) return fds_[i] >= 0;
    return false;
  }

  bool any_available() const {
    for (int fd : fds_)
      if (fd >= 0) return true;
    return false;
  }

  void start() {
#if defined(__linux__)
    for (int fd : fds_) {
      if (fd < 0) continue;
      ::ioctl(fd, PERF_EVENT_IOC_RESET, 0);
      ::ioctl(fd, PERF_EVENT_IOC_ENABLE, 0);
    }
#endif
    running_ = true;
  }

  CounterReadings stop() {
    if (!running_) throw Error(Errc::counters_not_started);
    running_ = false;
    CounterReadings out;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      out[events_[i]] = std::nullopt;
#if defined(__linux__)
      const int fd = fds_[i];
      if (fd < 0) continue;
      ::ioctl(fd, PERF_EVENT_IOC_DISABLE, 0);
      // value, time_enabled, time_running
      std::uint64_t buf[3] = {};
      if (::read(fd, buf, sizeof(buf)) != static_cast<ssize_t>(sizeof(buf)) || buf[2] == 0) continue;
      // Scale up when the kernel multiplexed the counter.
      const long double scaled = static_cast<long double>(buf[0]) * buf[1] / buf[2];
      out[events_[i]] = static_cast<std::uint64_t>(scaled);
#endif
    }
    return out;
  }

 private:
  static int open_event(const std::string& name) {
    bool known = false;
    for (auto k : known_events()) known |= (k == name);
    if (!known) throw Error(Errc::unknown_event, name);
#if defined(__linux__)
    perf_event_attr attr;
    std::memset(&attr, 0, sizeof(attr));
    attr.size = sizeof(attr);
    attr.disabled = 1;
    attr.exclude_kernel = 1;
    attr.exclude_hv = 1;
    attr.read_format = PERF_FORMAT_TOTAL_TIME_ENABLED | PERF_FORMAT_TOTAL_TIME_RUNNING;
    auto hw_cache = [](std::uint64_t cache, std::uint64_t op, std::uint64_t result) {
      return cache | (op << 8) | (result << 16);
    };
    if (name == "cycles") {
      attr.type = PERF_TYPE_HARDWARE;
      attr.config = PERF_COUNT_HW_CPU_CYCLES;
    } else if (name == "instructions") {
      attr.type = PERF_TYPE_HARDWARE;
      attr.config = PERF_COUNT_HW_INSTRUCTIONS;
    } else if (name == "llc-references") {
      attr.type = PERF_TYPE_HARDWARE;
      attr.config = PERF_COUNT_HW_CACHE_REFERENCES;
    } else if (name == "llc-misses") {
      attr.type = PERF_TYPE_HARDWARE;
      attr.config = PERF_COUNT_HW_CACHE_MISSES;
    } else if (name == "stalled-cycles-backend") {
      attr.type = PERF_TYPE_HARDWARE;
      attr.config = PERF_COUNT_HW_STALLED_CYCLES_BACKEND;
    } else if (name == "dtlb-load-misses") {
      attr.type = PERF_TYPE_HW_CACHE;
      attr.config = hw_cache(PERF_COUNT_HW_CACHE_DTLB, PERF_COUNT_HW_CACHE_OP_READ, PERF_COUNT_HW_CACHE_RESULT_MISS);
    } else if (name == "task-clock") {
      attr.type = PERF_TYPE_SOFTWARE;
      attr.config = PERF_COUNT_SW_TASK_CLOCK;
    } else if (name == "page-faults") {
      attr.type = PERF_TYPE_SOFTWARE;
      attr.config = PERF_COUNT_SW_PAGE_FAULTS;
    }
    const long fd = ::syscall(SYS_perf_event_open, &attr, 0, -1, -1, 0);
    return fd < 0 ? -1 : static_cast<int>(fd);
#else
    return -1;
#endif
  }

  std::vector<std::string> events_;
  std::vector<int> fds_;
  bool running_ = false;
};

inline CounterSet open_counters(std::vector<std::string> events) { return CounterSet(std::move(events)); }

}  // namespace turbomem
