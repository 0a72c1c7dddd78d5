#pragma once

// Order-preserving integer keys for IEEE-754 binary32 bit patterns.
//
// A binary32 value with its sign bit clear orders exactly like its bit pattern read as a
// signed integer. Negative values order in reverse, so their low 31 bits are inverted,
// which maps them below zero in the correct order. -0.0 is folded onto +0.0 first so
// that keys compare equal whenever the floats compare equal.

#include <bit>
#include <compare>
#include <cstdint>

#include "treegrate/errors.hpp"

namespace treegrate {

enum class CompareOp : std::uint8_t { kLE, kLT };

inline constexpr std::uint32_t kSignBit = 0x80000000u;
inline constexpr std::uint32_t kExponentMask = 0x7F800000u;
inline constexpr std::uint32_t kMantissaMask = 0x007FFFFFu;
inline constexpr std::uint32_t kNegativeZeroBits = 0x80000000u;

struct FlintKey {
  std::int32_t value = 0;

  friend constexpr auto operator<=>(FlintKey, FlintKey) = default;
};

constexpr bool is_nan_bits(std::uint32_t bits) noexcept {
  return (bits & kExponentMask) == kExponentMask && (bits & kMantissaMask) != 0;
}

constexpr std::uint32_t canonicalize_zero(std::uint32_t bits) noexcept {
  return bits == kNegativeZeroBits ? 0u : bits;
}

// Key without the NaN precondition check. Used on hot paths where NaN has already been
// routed to missing-value handling.
constexpr FlintKey flint_key_unchecked(std::uint32_t bits) noexcept {
  bits = canonicalize_zero(bits);
  auto const i = static_cast<std::int32_t>(bits);
  return FlintKey{i >= 0 ? i : static_cast<std::int32_t>(bits ^ 0x7FFFFFFFu)};
}

inline FlintKey flint_key(std::uint32_t bits) {
  if (is_nan_bits(bits)) {
    throw DomainError("flint_key: NaN has no key; route missing values through default_left");
  }
  return flint_key_unchecked(bits);
}

constexpr bool compare_keys(FlintKey value, FlintKey threshold, CompareOp op) noexcept {
  return op == CompareOp::kLE ? value <= threshold : value < threshold;
}

inline bool compare_as_int(std::uint32_t value_bits, std::uint32_t threshold_bits, CompareOp op) {
  return compare_keys(flint_key(value_bits), flint_key(threshold_bits), op);
}

constexpr std::uint32_t float_bits(float f) noexcept { return std::bit_cast<std::uint32_t>(f); }
constexpr float bits_float(std::uint32_t bits) noexcept { return std::bit_cast<float>(bits); }

}  // namespace treegrate
