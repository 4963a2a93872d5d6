#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

#include "gdp/primitives.hpp"

namespace gdp {

/// Index of a finalized device profile in the world registry. Only
/// onboarded devices have one, so a DeviceId is itself proof of onboarding.
struct DeviceId {
  std::uint32_t value = 0;

  auto operator<=>(const DeviceId&) const = default;
};

/// Log label of a device: "d" followed by its registry index.
inline std::string label(DeviceId id) { return "d" + std::to_string(id.value); }

/// Token amount in micro-tokens. Integer arithmetic keeps conservation exact.
struct Tokens {
  static constexpr std::int64_t kScale = 1'000'000;

  std::int64_t micros = 0;

  static constexpr Tokens whole(std::int64_t n) noexcept { return Tokens{n * kScale}; }
  static Tokens from_double(double t);
  double to_double() const noexcept { return static_cast<double>(micros) / kScale; }
  std::string str() const;

  constexpr Tokens operator+(Tokens o) const noexcept { return Tokens{micros + o.micros}; }
  constexpr Tokens operator-(Tokens o) const noexcept { return Tokens{micros - o.micros}; }
  constexpr Tokens operator-() const noexcept { return Tokens{-micros}; }
  Tokens& operator+=(Tokens o) noexcept {
    micros += o.micros;
    return *this;
  }
  Tokens& operator-=(Tokens o) noexcept {
    micros -= o.micros;
    return *this;
  }
  auto operator<=>(const Tokens&) const = default;
};

enum class Verdict : std::uint8_t { Valid = 1, Invalid = 0 };

const char* to_string(Verdict v) noexcept;

}  // namespace gdp

template <>
struct std::hash<gdp::DeviceId> {
  std::size_t operator()(const gdp::DeviceId& d) const noexcept { return std::hash<std::uint32_t>{}(d.value); }
};
