#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "ntn/common.hpp"

namespace ntn {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Derives an independent stream seed from a base seed and up to three stream
/// labels (e.g. sweep-cell indices and a trial index). Full avalanche between
/// absorbed labels, so neighbouring labels give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  s = detail::splitmix64(s) ^ (a + 0x9e3779b97f4a7c15ULL);
  s = detail::splitmix64(s) ^ (b + 0xbf58476d1ce4e5b9ULL);
  s = detail::splitmix64(s) ^ (c + 0x94d049bb133111ebULL);
  return detail::splitmix64(s);
}

/// xoshiro256++ generator with Gaussian draws via the Marsaglia polar method.
/// Deterministic for a given seed on every platform; callers own the instance,
/// so independent trials get independent generators (see derive_seed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = detail::splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result =
        detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal draw.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  /// Circularly-symmetric complex normal with unit total variance, CN(0,1).
  cplx complex_gaussian() {
    const double a = gaussian();
    const double b = gaussian();
    return cplx(a * kInvSqrt2, b * kInvSqrt2);
  }

 private:
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ntn
