#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace turbomem {

// Index of a fixed-size slot inside a pool region.
class SlotIndex {
 public:
  using value_type = std::uint32_t;
  static constexpr value_type kNilValue = 0xFFFF'FFFFu;

  constexpr SlotIndex() noexcept = default;
  constexpr explicit SlotIndex(value_type v) noexcept : value_(v) {}

  static constexpr SlotIndex nil() noexcept { return SlotIndex{}; }

  constexpr value_type value() const noexcept { return value_; }
  constexpr bool is_nil() const noexcept { return value_ == kNilValue; }
  constexpr explicit operator bool() const noexcept { return !is_nil(); }

  friend constexpr auto operator<=>(SlotIndex, SlotIndex) noexcept = default;

 private:
  value_type value_ = kNilValue;
};

// Head of the global free stack: 32-bit top index in the low half and a
// 32-bit generation tag in the high half, swapped as one 64-bit word.
struct PackedHead {
  SlotIndex top;
  std::uint32_t tag = 0;

  static constexpr PackedHead unpack(std::uint64_t word) noexcept {
    return PackedHead{SlotIndex{static_cast<std::uint32_t>(word)}, static_cast<std::uint32_t>(word >> 32)};
  }

  constexpr std::uint64_t pack() const noexcept {
    return (std::uint64_t{tag} << 32) | top.value();
  }

  friend constexpr bool operator==(PackedHead, PackedHead) noexcept = default;
};

}  // namespace turbomem

template <>
struct std::hash<turbomem::SlotIndex> {
  std::size_t operator()(turbomem::SlotIndex s) const noexcept { return std::hash<std::uint32_t>{}(s.value()); }
};
