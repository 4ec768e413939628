#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "turbomem/baselines.hpp"
#include "turbomem/error.hpp"
#include "turbomem/pool.hpp"

namespace turbomem {

// Common surface of every slot handler, so harnesses and test suites can
// run unchanged against the pool and both baselines.
template <class H>
concept SlotHandler = requires(H& h, const H& ch, typename H::Handle& t, SlotIndex s, std::span<SlotIndex> out,
                               std::span<const SlotIndex> in) {
  { h.register_thread() } -> std::same_as<typename H::Handle>;
  { h.try_alloc(t) } -> std::same_as<std::optional<SlotIndex>>;
  { h.alloc(t) } -> std::same_as<SlotIndex>;
  h.free(t, s);
  { h.try_alloc_bulk(t, out) } -> std::same_as<bool>;
  h.free_bulk(t, in);
  h.drain_thread(t);
  { ch.slot_address(s) } -> std::same_as<std::byte*>;
  { ch.stats() } -> std::same_as<PoolStats>;
  { ch.audit() } -> std::same_as<AuditReport>;
  { ch.capacity() } -> std::same_as<std::size_t>;
  { t.cached() } -> std::same_as<std::size_t>;
};

static_assert(SlotHandler<Pool>);
static_assert(SlotHandler<GlobalOnlyPool>);
static_assert(SlotHandler<LockedRingPool>);

enum class HandlerKind { TurboMem, GlobalOnly, LockedRing };

constexpr std::string_view to_string(HandlerKind k) noexcept {
  switch (k) {
    case HandlerKind::TurboMem: return "turbomem";
    case HandlerKind::GlobalOnly: return "global-only";
    case HandlerKind::LockedRing: return "locked-ring";
  }
  return "turbomem";
}

inline HandlerKind parse_handler(std::string_view s) {
  if (s == "turbomem") return HandlerKind::TurboMem;
  if (s == "global-only") return HandlerKind::GlobalOnly;
  if (s == "locked-ring") return HandlerKind::LockedRing;
  throw Error(Errc::invalid_config, "unknown handler '" + std::string(s) + "'");
}

// Calls fn.template operator()<H>() for the handler type named by `kind`.
template <class Fn>
decltype(auto) visit_handler(HandlerKind kind, Fn&& fn) {
  switch (kind) {
    case HandlerKind::GlobalOnly: return fn.template operator()<GlobalOnlyPool>();
    case HandlerKind::LockedRing: return fn.template operator()<LockedRingPool>();
    case HandlerKind::TurboMem: break;
  }
  return fn.template operator()<Pool>();
}

}  // namespace turbomem
