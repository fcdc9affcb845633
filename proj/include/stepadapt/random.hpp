#pragma once

#include <cstdint>
#include <limits>

namespace stepadapt {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Stafford variant 13 finalizer (the SplitMix64 output mixer). Bijective on
/// 64-bit words with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Child seed for ensemble member `index`:
/// mix64(base ^ (golden * (index + 1))).
constexpr std::uint64_t child_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(base ^ (kGoldenGamma * (index + 1)));
}

/// Seedable counter-based 64-bit generator (SplitMix64). The state is a
/// Weyl counter, so jumping ahead is O(1) and splitting yields independent
/// streams. Satisfies UniformRandomBitGenerator.
class RandomState {
 public:
  using result_type = std::uint64_t;

  explicit constexpr RandomState(std::uint64_t seed = 0) noexcept : counter_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    counter_ += kGoldenGamma;
    return mix64(counter_);
  }

  /// Advance as if `n` draws had been taken.
  constexpr void jump(std::uint64_t n) noexcept { counter_ += kGoldenGamma * n; }

  /// Fresh generator seeded from this stream; advances this stream by one.
  constexpr RandomState split() noexcept { return RandomState(mix64((*this)())); }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform01() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

  friend constexpr bool operator==(const RandomState&, const RandomState&) = default;

 private:
  std::uint64_t counter_;
};

}  // namespace stepadapt
