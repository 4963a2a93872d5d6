#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gdp/error.hpp"

namespace gdp {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the i-th output (1-based) is mix64(seed + i * gamma).
///
/// This is SplitMix64, so any port reproduces the sequence from the seed alone.
/// Streams keyed by an integer are derived with `derive`, never by sharing a
/// generator, which keeps draws independent of call interleaving elsewhere.
class SeededRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  constexpr explicit SeededRng(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * kGamma);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1]; safe to take the log of.
  double uniform_open0() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Unbiased uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  bool bernoulli(double p) noexcept {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01() < p;
  }

  double normal() noexcept {
    // Box-Muller; one value per call keeps the draw count fixed.
    const double u1 = uniform_open0();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Independent child stream keyed by `key`. Does not advance this stream.
  constexpr SeededRng derive(std::uint64_t key) const noexcept {
    return SeededRng(mix64(seed_ ^ mix64(key + kGamma)));
  }

  /// Splits off a child stream and advances this one.
  constexpr SeededRng split() noexcept { return SeededRng(next_u64()); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Stable 64-bit key for a label (FNV-1a), used to derive named streams.
constexpr std::uint64_t stream_key(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Weighted sampling of k distinct indices without replacement
/// (Efraimidis-Spirakis exponential keys). Items with weight <= 0 are never
/// drawn. For k == 1 the draw is exactly proportional to weight. The result is
/// ordered by draw rank.
std::vector<std::size_t> sample_indices_without_replacement(SeededRng& rng,
                                                            std::span<const double> weights,
                                                            std::size_t k);

/// Draw order for all positive-weight items: the full successive-sampling
/// permutation. Callers that need constrained draws (group caps) walk it
/// greedily.
std::vector<std::size_t> weighted_draw_order(SeededRng& rng, std::span<const double> weights);

template <typename Id>
std::vector<Id> sample_without_replacement(SeededRng& rng, std::span<const Id> population,
                                           std::span<const double> weights, std::size_t k) {
  if (population.size() != weights.size())
    fail(ErrorCode::InsufficientPopulation, "population and weights differ in length");
  std::vector<Id> out;
  out.reserve(k);
  for (std::size_t i : sample_indices_without_replacement(rng, weights, k)) out.push_back(population[i]);
  return out;
}

}  // namespace gdp
