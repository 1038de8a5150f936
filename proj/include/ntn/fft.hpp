#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ntn/common.hpp"
#include "ntn/errors.hpp"

namespace ntn {

/// Iterative radix-2 transform with precomputed twiddles.
///
/// forward() is the plain unscaled DFT sum; inverse() carries the 1/N factor,
/// so inverse(forward(x)) == x and the pair matches the modulator/demodulator
/// scaling used throughout this library.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (!is_power_of_two(n)) throw ConfigError("FFT size must be a power of two");
    twiddle_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = cplx(std::cos(ang), std::sin(ang));
    }
    rev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = static_cast<std::uint32_t>(r);
    }
  }

  std::size_t size() const { return n_; }

  /// In-place DFT, no scaling: X[k] = sum_n x[n] e^{-j2πkn/N}.
  void forward(std::span<cplx> data) const { transform(data, false); }

  /// In-place inverse DFT with 1/N: x[n] = (1/N) sum_k X[k] e^{+j2πkn/N}.
  void inverse(std::span<cplx> data) const { transform(data, true); }

  static bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

 private:
  void transform(std::span<cplx> data, bool invert) const {
    if (data.size() != n_) throw InputError("FFT buffer length mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j = rev_[i];
      if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t step = n_ / len;
      for (std::size_t base = 0; base < n_; base += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          cplx w = twiddle_[k * step];
          if (invert) w = std::conj(w);
          const cplx odd = data[base + k + len / 2] * w;
          const cplx even = data[base + k];
          data[base + k] = even + odd;
          data[base + k + len / 2] = even - odd;
        }
      }
    }
    if (invert) {
      const double scale = 1.0 / static_cast<double>(n_);
      for (auto& v : data) v *= scale;
    }
  }

  std::size_t n_;
  std::vector<cplx> twiddle_;
  std::vector<std::uint32_t> rev_;
};

}  // namespace ntn
