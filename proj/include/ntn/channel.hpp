#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ntn/common.hpp"
#include "ntn/errors.hpp"
#include "ntn/ofdm.hpp"
#include "ntn/rng.hpp"

namespace ntn {

/// One discrete channel tap. Line-of-sight taps keep their configured
/// magnitude and only pick up a random phase per realization; other taps are
/// multiplied by a CN(0,1) draw (Rayleigh magnitude), giving a Rician-like
/// profile when a strong LOS tap leads the table.
struct ChannelTap {
  std::size_t delay_samples = 0;
  cplx gain{1.0, 0.0};
  bool line_of_sight = false;
};

/// Satellite channel description for one trial setup.
struct ChannelConfig {
  double relative_speed_mps = 0.0;  // v, signed
  double freq_offset_hz = 0.0;      // oscillator offset, signed
  std::vector<ChannelTap> taps{ChannelTap{}};
  double snr_db = std::numeric_limits<double>::infinity();
  std::size_t num_rx = 1;
  double sampling_ratio = 0.0;  // alpha = f_s/f_c; <= 0 means derive from the grid
  bool model_drift = false;

  void validate() const {
    if (taps.empty()) throw ConfigError("channel needs at least one tap");
    if (num_rx < 1) throw ConfigError("channel needs at least one receive antenna");
    if (sampling_ratio < 0.0) throw ConfigError("sampling ratio must be positive");
  }
};

/// Tap gains drawn once per trial (quasi-static) together with the trial's
/// fixed speed, oscillator offset and sampling ratio.
struct ChannelRealization {
  double relative_speed_mps = 0.0;
  double freq_offset_hz = 0.0;
  double sampling_ratio = 0.0;
  bool model_drift = false;
  std::vector<std::vector<ChannelTap>> antenna_taps;  // [antenna][tap]
};

/// Composite offset observed at an absolute radio frequency: the oscillator
/// offset plus the Doppler shift v * f / c.
inline double composite_offset_hz(double freq_offset_hz, double relative_speed_mps,
                                  double absolute_freq_hz) {
  return freq_offset_hz + relative_speed_mps * absolute_freq_hz / kSpeedOfLightMps;
}

inline double composite_offset_hz(const ChannelRealization& real, double absolute_freq_hz) {
  return composite_offset_hz(real.freq_offset_hz, real.relative_speed_mps, absolute_freq_hz);
}

/// Draws per-antenna tap gains. Draw order is antenna-major and therefore
/// reproducible for a given generator state.
inline ChannelRealization realize_channel(const ChannelConfig& cfg, const OfdmConfig& grid,
                                          Rng& rng) {
  cfg.validate();
  ChannelRealization real;
  real.relative_speed_mps = cfg.relative_speed_mps;
  real.freq_offset_hz = cfg.freq_offset_hz;
  real.sampling_ratio =
      cfg.sampling_ratio > 0.0 ? cfg.sampling_ratio : grid.sample_rate_hz() / grid.carrier_freq_hz;
  real.model_drift = cfg.model_drift;
  real.antenna_taps.resize(cfg.num_rx);
  for (auto& taps : real.antenna_taps) {
    taps = cfg.taps;
    for (auto& tap : taps) {
      if (tap.line_of_sight) {
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        tap.gain *= cplx(std::cos(phi), std::sin(phi));
      } else {
        tap.gain *= rng.complex_gaussian();
      }
    }
  }
  return real;
}

namespace detail {

/// y[n] = e^{j2π f (n + start) T_s} * sum_t gain_t x[n - delay_t], zero history.
inline void taps_and_ramp(std::span<const cplx> x, std::span<const ChannelTap> taps,
                          double freq_hz, double sample_interval_s, std::size_t start_index,
                          std::span<cplx> out) {
  const std::size_t len = x.size();
  for (std::size_t n = 0; n < len; ++n) {
    cplx acc{0.0, 0.0};
    for (const auto& tap : taps) {
      if (n >= tap.delay_samples) acc += tap.gain * x[n - tap.delay_samples];
    }
    out[n] = acc;
  }
  // Incremental phasor, restarted from an exact value every block to keep the
  // accumulated rounding below ~1e-13 rad.
  constexpr std::size_t kBlock = 4096;
  const cplx step = std::polar(1.0, 2.0 * kPi * freq_hz * sample_interval_s);
  for (std::size_t base = 0; base < len; base += kBlock) {
    cplx phasor = std::polar(
        1.0, 2.0 * kPi * freq_hz * sample_interval_s * static_cast<double>(start_index + base));
    const std::size_t stop = std::min(len, base + kBlock);
    for (std::size_t n = base; n < stop; ++n) {
      out[n] *= phasor;
      phasor *= step;
    }
  }
}

}  // namespace detail

/// Applies the tap profile and the composite phase ramp of one antenna.
/// `absolute_freq_hz` is the radio frequency the Doppler term is evaluated at
/// (the carrier, or carrier + position offset for a per-position baseband).
inline TimeDomainSignal apply_channel_single(const TimeDomainSignal& x,
                                             std::span<const ChannelTap> taps,
                                             const ChannelRealization& real,
                                             double absolute_freq_hz, const OfdmConfig& grid,
                                             std::size_t start_index = 0) {
  if (x.samples.empty()) throw InputError("channel input must be non-empty");
  TimeDomainSignal out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.samples.resize(x.samples.size());
  const double composite = composite_offset_hz(real, absolute_freq_hz);
  detail::taps_and_ramp(x.samples, taps, composite, grid.sample_interval_s(), start_index,
                        out.samples);
  return out;
}

/// Per-antenna channel outputs, noiseless. Noise is a separate step so the
/// caller controls generator use per antenna.
inline std::vector<TimeDomainSignal> apply_channel(const TimeDomainSignal& x,
                                                   const ChannelRealization& real,
                                                   const OfdmConfig& grid,
                                                   std::size_t start_index = 0) {
  std::vector<TimeDomainSignal> out;
  out.reserve(real.antenna_taps.size());
  for (const auto& taps : real.antenna_taps) {
    out.push_back(
        apply_channel_single(x, taps, real, grid.carrier_freq_hz, grid, start_index));
  }
  return out;
}

/// Adds circularly-symmetric complex Gaussian noise at the requested SNR,
/// measured against the mean power of the input samples. An infinite SNR is
/// the noiseless flag and returns the input unchanged.
inline TimeDomainSignal add_noise(const TimeDomainSignal& y, double snr_db, Rng& rng) {
  if (y.samples.empty()) throw InputError("noise addition needs a non-empty signal");
  TimeDomainSignal out = y;
  if (std::isinf(snr_db) && snr_db > 0.0) return out;
  double power = 0.0;
  for (const auto& v : y.samples) power += std::norm(v);
  power /= static_cast<double>(y.samples.size());
  const double noise_var = power * std::pow(10.0, -snr_db / 10.0);
  const double sigma = std::sqrt(noise_var / 2.0);
  for (auto& v : out.samples) {
    v += cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
  }
  return out;
}

/// Band-limited (trigonometric) interpolation of the whole buffer, evaluated
/// at the perturbed instants m * interval_ratio. A ratio of exactly 1
/// reproduces the input. Only small perturbations are meaningful here, so
/// ratios outside (0.99, 1.01) are rejected.
inline TimeDomainSignal resample_trig(const TimeDomainSignal& x, double interval_ratio) {
  if (!(interval_ratio > 0.99 && interval_ratio < 1.01))
    throw ConfigError("resampling ratio outside (0.99, 1.01)");
  if (x.samples.empty()) throw InputError("resampling needs a non-empty signal");
  const std::size_t len = x.samples.size();

  std::vector<cplx> spectrum(x.samples.begin(), x.samples.end());
  // Arbitrary lengths are allowed; fall back to the direct sum for the DFT
  // when the length is not a power of two (resampling is not a hot path).
  if (Fft::is_power_of_two(len)) {
    Fft(len).forward(spectrum);
  } else {
    std::vector<cplx> freq(len);
    for (std::size_t k = 0; k < len; ++k) {
      cplx acc{0.0, 0.0};
      const cplx step = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) / static_cast<double>(len));
      cplx w{1.0, 0.0};
      for (std::size_t n = 0; n < len; ++n) {
        acc += x.samples[n] * w;
        w *= step;
      }
      freq[k] = acc;
    }
    spectrum = std::move(freq);
  }

  TimeDomainSignal out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.samples.assign(len, cplx{0.0, 0.0});
  const double ld = static_cast<double>(len);
  for (std::size_t k = 0; k < len; ++k) {
    // Signed bin index; the Nyquist bin (even lengths) splits into a cosine.
    const bool nyquist = (len % 2 == 0) && (k == len / 2);
    const double bin = (k <= len / 2) ? static_cast<double>(k)
                                      : static_cast<double>(k) - ld;
    const cplx coeff = spectrum[k] / ld;
    const double step_ang = 2.0 * kPi * bin * interval_ratio / ld;
    const cplx step = std::polar(1.0, step_ang);
    cplx w{1.0, 0.0};
    if (nyquist) {
      for (std::size_t m = 0; m < len; ++m) {
        out.samples[m] += coeff * std::cos(step_ang * static_cast<double>(m));
      }
    } else {
      for (std::size_t m = 0; m < len; ++m) {
        out.samples[m] += coeff * w;
        w *= step;
      }
    }
  }
  return out;
}

/// Receiver sampling drift: the converter clock derives from the same
/// oscillator that causes the frequency offset, so the actual sampling
/// interval is 1 / (alpha (f_c - offset)) instead of the nominal T_s. The
/// output holds the band-limited input evaluated at the drifted instants; a
/// tone at f0 therefore lands at f0 * T_s'/T_s when read against the nominal
/// clock, which is exactly the deviation the drift-aware estimator removes.
inline TimeDomainSignal apply_sampling_drift(const TimeDomainSignal& y, double alpha,
                                             double freq_offset_hz) {
  if (!(alpha > 0.0)) throw ConfigError("sampling ratio must be positive");
  if (!(y.sample_rate_hz > 0.0)) throw InputError("signal needs a sample rate");
  // T_s'/T_s = f_s / (alpha (f_c - offset)) with f_c = f_s / alpha.
  const double carrier = y.sample_rate_hz / alpha;
  const double interval_ratio = carrier / (carrier - freq_offset_hz);
  return resample_trig(y, interval_ratio);
}

}  // namespace ntn
