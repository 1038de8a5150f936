#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ntn/common.hpp"
#include "ntn/errors.hpp"
#include "ntn/fft.hpp"

namespace ntn {

/// OFDM grid geometry. The sample interval is always derived from the
/// subcarrier spacing and DFT size and never stored separately.
struct OfdmConfig {
  double subcarrier_spacing_hz = 30e3;  // B
  std::size_t dft_size = 256;           // N, power of two
  std::size_t cp_len = 18;              // N_cp
  double carrier_freq_hz = 2e9;         // f_c

  double sample_rate_hz() const { return subcarrier_spacing_hz * static_cast<double>(dft_size); }
  double sample_interval_s() const { return 1.0 / sample_rate_hz(); }
  std::size_t symbol_len() const { return dft_size + cp_len; }
  double wavelength_m() const { return kSpeedOfLightMps / carrier_freq_hz; }

  void validate() const {
    if (!(subcarrier_spacing_hz > 0.0)) throw ConfigError("subcarrier spacing must be positive");
    if (!Fft::is_power_of_two(dft_size)) throw ConfigError("DFT size must be a power of two");
    if (cp_len >= dft_size) throw ConfigError("cyclic prefix must be shorter than the DFT size");
    if (!(carrier_freq_hz > 0.0)) throw ConfigError("carrier frequency must be positive");
  }
};

/// One OFDM symbol in the frequency domain: exactly N subcarrier values,
/// unoccupied subcarriers exactly zero.
struct FrequencyDomainSymbols {
  std::vector<cplx> values;
};

/// Complex baseband samples at a known sample rate.
struct TimeDomainSignal {
  std::vector<cplx> samples;
  double sample_rate_hz = 0.0;
};

/// IDFT with 1/N scaling plus cyclic prefix. Output holds N_cp + N samples;
/// buffer index 0 corresponds to time index -N_cp.
inline TimeDomainSignal modulate(const FrequencyDomainSymbols& symbols, const OfdmConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.dft_size;
  if (symbols.values.size() != n)
    throw ConfigError("frequency-domain symbol count must equal the DFT size");
  std::vector<cplx> body(symbols.values);
  Fft(n).inverse(body);
  TimeDomainSignal out;
  out.sample_rate_hz = cfg.sample_rate_hz();
  out.samples.resize(cfg.cp_len + n);
  for (std::size_t i = 0; i < cfg.cp_len; ++i) out.samples[i] = body[n - cfg.cp_len + i];
  for (std::size_t i = 0; i < n; ++i) out.samples[cfg.cp_len + i] = body[i];
  return out;
}

/// Concatenates one CP-prefixed symbol per entry of `grids`.
inline TimeDomainSignal modulate_burst(std::span<const FrequencyDomainSymbols> grids,
                                       const OfdmConfig& cfg) {
  TimeDomainSignal out;
  out.sample_rate_hz = cfg.sample_rate_hz();
  out.samples.reserve(grids.size() * cfg.symbol_len());
  for (const auto& grid : grids) {
    const TimeDomainSignal sym = modulate(grid, cfg);
    out.samples.insert(out.samples.end(), sym.samples.begin(), sym.samples.end());
  }
  return out;
}

/// Discards the first N_cp samples and applies the unscaled N-point DFT.
inline FrequencyDomainSymbols demodulate(const TimeDomainSignal& signal, const OfdmConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.dft_size;
  if (signal.samples.size() < cfg.symbol_len())
    throw InputError("signal shorter than one CP-prefixed OFDM symbol");
  FrequencyDomainSymbols out;
  out.values.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(cfg.cp_len),
                    signal.samples.begin() + static_cast<std::ptrdiff_t>(cfg.cp_len + n));
  Fft(n).forward(out.values);
  return out;
}

/// Normalized Dirichlet leakage coefficient for a residual subcarrier offset.
///
/// leak(a) = (1/N) e^{jπ a (1-1/N)} sin(πa) / sin(πa/N); the removable
/// singularities at a = 0 mod N evaluate to unit-magnitude coefficients.
inline cplx dirichlet_leakage(double arg, std::size_t n) {
  const double nd = static_cast<double>(n);
  const double wraps = std::nearbyint(arg / nd);
  const double frac = arg - wraps * nd;  // |frac| <= N/2
  // sin(πa) = (-1)^{mN} sin(π frac), sin(πa/N) = (-1)^m sin(π frac / N)
  const long long m = std::llround(wraps);
  const double sign = (m * static_cast<long long>(n - 1)) % 2 == 0 ? 1.0 : -1.0;
  double ratio;
  if (frac == 0.0) {
    ratio = nd;
  } else {
    ratio = std::sin(kPi * frac) / std::sin(kPi * frac / nd);
  }
  const double ang = kPi * arg * (1.0 - 1.0 / nd);
  return (sign * ratio / nd) * cplx(std::cos(ang), std::sin(ang));
}

/// Inter-carrier-interference profile for a composite frequency offset
/// (oscillator offset plus Doppler). Entry (k, l) of the returned row-major
/// N x N matrix is the coefficient multiplying X[l] in the demodulated Y[k].
/// A zero offset yields the identity; an integer multiple of the subcarrier
/// spacing yields a cyclic shift of the identity.
inline std::vector<cplx> ici_profile(const OfdmConfig& cfg, double composite_offset_hz) {
  cfg.validate();
  if (!(std::abs(composite_offset_hz) < 0.5 * cfg.sample_rate_hz()))
    throw InputError("composite offset must lie below half the sample rate");
  const std::size_t n = cfg.dft_size;
  const double eps = composite_offset_hz / cfg.subcarrier_spacing_hz;
  std::vector<cplx> matrix(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      const double arg = static_cast<double>(l) - static_cast<double>(k) + eps;
      matrix[k * n + l] = dirichlet_leakage(arg, n);
    }
  }
  return matrix;
}

}  // namespace ntn
