#pragma once

// Seedable, platform-independent random source.
//
// Generator: xoshiro256++ seeded through splitmix64. Normal variates come from a
// 256-layer ziggurat whose tables are built once from closed-form recursions, so the
// sample sequence depends only on IEEE double arithmetic and not on the standard
// library's distribution implementations.
//
// Stream splitting: `derive(run, purpose)` hashes (state seed, run, purpose) through
// splitmix64 into a fresh 256-bit state. Distinct sub-streams start at independent
// uniformly random points of the 2^256 - 1 cycle; the chance that two of them overlap
// within 2^32 draws is below 2^-190.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace stairs {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t s = a ^ (b * 0xd1b54a32d192ed03ULL);
  return splitmix64(s);
}

namespace detail {

struct ZigguratTables {
  static constexpr int kLayers = 256;
  static constexpr double kR = 3.6541528853610088;
  static constexpr double kArea = 4.92867323399e-3;

  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers + 1> f{};

  ZigguratTables() {
    const auto pdf = [](double t) { return std::exp(-0.5 * t * t); };
    x[0] = kArea / pdf(kR);
    x[1] = kR;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kArea / x[i - 1] + pdf(x[i - 1])));
    }
    x[kLayers] = 0.0;
    for (int i = 0; i <= kLayers; ++i) f[i] = pdf(x[i]);
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace detail

/// Single-owner random source. Copying duplicates the stream state (useful for
/// common-random-number constructions); independent streams come from derive().
class RngHandle {
 public:
  using result_type = std::uint64_t;

  explicit RngHandle(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = std::rotl(s_[3], 45);
    return result;
  }

  /// Independent sub-stream for (run, purpose). Depends only on the seed this handle
  /// was created with, never on how many draws have been taken from it.
  RngHandle derive(std::uint64_t run, std::uint64_t purpose = 0) const noexcept {
    return RngHandle(mix64(mix64(seed_, run + 1), purpose + 0x5851f42d4c957f2dULL));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_pos() noexcept { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

  /// +1 or -1 with equal probability.
  double rademacher() noexcept { return (next() >> 63) ? 1.0 : -1.0; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double normal() noexcept {
    const auto& zt = detail::ziggurat();
    for (;;) {
      const std::uint64_t bits = next();
      const int i = static_cast<int>(bits & 0xff);
      const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
      const double x = u * zt.x[i];
      if (std::abs(x) < zt.x[i + 1]) return x;
      if (i == 0) return u < 0.0 ? -normal_tail() : normal_tail();
      const double y = zt.f[i + 1] + (zt.f[i] - zt.f[i + 1]) * uniform();
      if (y < std::exp(-0.5 * x * x)) return x;
    }
  }

 private:
  double normal_tail() noexcept {
    constexpr double r = detail::ZigguratTables::kR;
    for (;;) {
      const double a = -std::log(uniform_pos()) / r;
      const double b = -std::log(uniform_pos());
      if (2.0 * b >= a * a) return r + a;
    }
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace stairs
