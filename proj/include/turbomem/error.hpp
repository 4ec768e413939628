#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace turbomem {

enum class Errc {
  invalid_config,
  region_too_small,
  misaligned_region,
  pool_exhausted,
  registration_limit,
  handle_retired,
  double_free,
  out_of_range,
  out_of_memory,
  huge_pages_unsupported,
  numa_unsupported,
  released,
  invalid_core,
  counters_not_started,
  unknown_event,
  io_error,
  parse_error,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::invalid_config: return "invalid config";
    case Errc::region_too_small: return "region too small";
    case Errc::misaligned_region: return "misaligned region";
    case Errc::pool_exhausted: return "pool exhausted";
    case Errc::registration_limit: return "registration limit exceeded";
    case Errc::handle_retired: return "handle retired";
    case Errc::double_free: return "double free";
    case Errc::out_of_range: return "slot out of range";
    case Errc::out_of_memory: return "out of memory";
    case Errc::huge_pages_unsupported: return "huge pages unsupported";
    case Errc::numa_unsupported: return "numa binding unsupported";
    case Errc::released: return "released";
    case Errc::invalid_core: return "invalid core";
    case Errc::counters_not_started: return "counters not started";
    case Errc::unknown_event: return "unknown event";
    case Errc::io_error: return "io error";
    case Errc::parse_error: return "parse error";
  }
  return "unknown";
}

// All library failures surface as this exception; the hot path reports
// exhaustion through std::optional / bool instead.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string_view detail = {})
      : std::runtime_error(detail.empty()
                               ? std::string(to_string(code))
                               : std::string(to_string(code)) + ": " + std::string(detail)),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace turbomem
