#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ntn/channel.hpp"
#include "ntn/common.hpp"
#include "ntn/errors.hpp"
#include "ntn/estimator.hpp"
#include "ntn/ofdm.hpp"
#include "ntn/refsig.hpp"
#include "ntn/rng.hpp"

namespace ntn {

// ---------------------------------------------------------------------------
// Campaign configuration
// ---------------------------------------------------------------------------

/// Per-trial channel randomization: offset and Doppler are drawn uniformly
/// from these ppm ranges (relative to the carrier and to c respectively).
struct ChannelSettings {
  std::array<double, 2> doppler_ppm{-24.5, 24.5};
  std::array<double, 2> freq_offset_ppm{-10.5, 10.5};
  std::vector<ChannelTap> taps;
  std::size_t num_rx = 2;
  bool model_drift = false;
  double sampling_ratio = 0.0;  // alpha; 0 derives f_s/f_c
};

/// Implementation-default tap table: a strong line-of-sight tap plus weak
/// delayed Rayleigh taps, unit total power. These are stand-in values for a
/// LOS-dominated satellite profile, not standardized channel data; override
/// them from the config file for a specific model.
inline std::vector<ChannelTap> default_taps() {
  return {
      ChannelTap{0, cplx{std::sqrt(0.9984), 0.0}, true},
      ChannelTap{1, cplx{std::sqrt(0.0008), 0.0}, false},
      ChannelTap{2, cplx{std::sqrt(0.0005), 0.0}, false},
      ChannelTap{3, cplx{std::sqrt(0.0003), 0.0}, false},
  };
}

struct RefsigSettings {
  std::size_t bandwidth_subcarriers = 240;
  std::size_t num_symbols = 4;       // OFDM symbols per burst
  std::size_t bursts_per_trial = 512;  // burst repetitions one estimate integrates
  std::uint64_t sequence_seed = 1;   // position p uses sequence_seed + p
};

enum class BurstCombining {
  kMetricSum,   // sum differential metrics across all bursts, solve once
  kPerBurstIir, // solve per burst, first-order IIR across bursts
};

enum class SimulationMode {
  kNarrowband,  // each position in its own baseband (default)
  kWideband,    // all positions on one wide grid, with band-pass extraction
};

inline const std::vector<double>& default_separation_sweep_hz() {
  static const std::vector<double> v{288e6, 576e6, 864e6, 1152e6, 1440e6, 1728e6, 2016e6};
  return v;
}

inline const std::vector<double>& default_snr_sweep_db() {
  static const std::vector<double> v{-3.0, 1.0, 5.0, 9.0, 13.0};
  return v;
}

inline std::vector<double> default_quantiles() {
  std::vector<double> q;
  for (int i = 1; i <= 19; ++i) q.push_back(0.05 * i);
  q.push_back(0.99);
  return q;
}

struct CampaignConfig {
  OfdmConfig ofdm;
  double carrier_bandwidth_hz = 2.1e9;
  ChannelSettings channel{ .taps = default_taps() };
  RefsigSettings refsig;
  EstimatorConfig estimator;
  BurstCombining combining = BurstCombining::kMetricSum;
  SimulationMode mode = SimulationMode::kNarrowband;

  std::vector<double> snr_db{-3.0};
  std::vector<double> separation_hz{864e6};
  std::optional<std::vector<double>> position_offsets_hz;  // overrides separations

  std::size_t trials = 2000;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::vector<double> quantiles = default_quantiles();
  std::string output_path = "campaign.csv";
  bool verbose = false;

  // Set by the config loader so `sweep` knows whether the file pinned an axis.
  bool snr_from_file = false;
  bool separation_from_file = false;

  void validate() const;
};

/// The estimator's alpha defaults to the grid's f_s/f_c when not configured.
inline EstimatorConfig resolved_estimator(const CampaignConfig& cfg) {
  EstimatorConfig est = cfg.estimator;
  if (est.alpha <= 0.0) {
    est.alpha = cfg.channel.sampling_ratio > 0.0
                    ? cfg.channel.sampling_ratio
                    : cfg.ofdm.sample_rate_hz() / cfg.ofdm.carrier_freq_hz;
  }
  return est;
}

/// One sweep cell's position layout.
struct PositionCell {
  double separation_hz = 0.0;
  std::vector<double> offsets_hz;
};

inline std::vector<PositionCell> resolved_position_cells(const CampaignConfig& cfg) {
  std::vector<PositionCell> cells;
  if (cfg.position_offsets_hz) {
    PositionCell cell;
    cell.offsets_hz = *cfg.position_offsets_hz;
    const auto [lo, hi] = std::minmax_element(cell.offsets_hz.begin(), cell.offsets_hz.end());
    cell.separation_hz = *hi - *lo;
    cells.push_back(std::move(cell));
  } else {
    for (double sep : cfg.separation_hz) {
      cells.push_back(PositionCell{sep, {-0.5 * sep, 0.5 * sep}});
    }
  }
  return cells;
}

inline ReferenceSignalSpec position_spec(const CampaignConfig& cfg, double offset_hz,
                                         std::size_t position_index) {
  ReferenceSignalSpec spec;
  spec.position_offset_hz = offset_hz;
  spec.bandwidth_subcarriers = cfg.refsig.bandwidth_subcarriers;
  spec.num_symbols = cfg.refsig.num_symbols;
  spec.sequence_seed = cfg.refsig.sequence_seed + position_index;
  return spec;
}

inline void CampaignConfig::validate() const {
  ofdm.validate();
  if (!(carrier_bandwidth_hz > 0.0)) throw ConfigError("carrier bandwidth must be positive");
  if (trials < 1) throw ConfigError("at least one trial is required");
  if (snr_db.empty()) throw ConfigError("SNR sweep must not be empty");
  if (channel.taps.empty()) throw ConfigError("channel tap table must not be empty");
  if (channel.num_rx < 1) throw ConfigError("at least one receive antenna is required");
  if (channel.sampling_ratio < 0.0) throw ConfigError("sampling ratio must not be negative");
  if (channel.doppler_ppm[0] > channel.doppler_ppm[1] ||
      channel.freq_offset_ppm[0] > channel.freq_offset_ppm[1])
    throw ConfigError("ppm ranges must be ordered as [low, high]");
  if (channel.model_drift &&
      std::max(std::abs(channel.freq_offset_ppm[0]), std::abs(channel.freq_offset_ppm[1])) >=
          9900.0)
    throw ConfigError("sampling drift models clock errors below 1%; narrow the offset range");
  if (refsig.num_symbols == 0) throw ConfigError("bursts need at least one OFDM symbol");
  if (refsig.bursts_per_trial == 0) throw ConfigError("at least one burst per trial is required");
  if (quantiles.empty()) throw ConfigError("quantile list must not be empty");
  for (double q : quantiles) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("quantiles must lie in (0, 1]");
  }
  resolved_estimator(*this).validate();
  if (estimator.lag >= ofdm.dft_size)
    throw ConfigError("differential lag must lie inside one CP-stripped symbol");

  const auto cells = resolved_position_cells(*this);
  if (cells.empty()) throw ConfigError("separation sweep must not be empty");
  for (const auto& cell : cells) {
    PositionSet set;
    set.carrier_freq_hz = ofdm.carrier_freq_hz;
    set.carrier_bandwidth_hz = carrier_bandwidth_hz;
    for (std::size_t p = 0; p < cell.offsets_hz.size(); ++p) {
      set.positions.push_back(position_spec(*this, cell.offsets_hz[p], p));
    }
    set.validate(ofdm);
    if (mode == SimulationMode::kWideband) {
      for (const auto& spec : set.positions) {
        const double bins = spec.position_offset_hz / ofdm.subcarrier_spacing_hz;
        if (std::abs(bins - std::nearbyint(bins)) > 1e-6)
          throw ConfigError("wideband positions must align to the subcarrier grid");
        const long center = static_cast<long>(std::llround(bins));
        const long half = static_cast<long>(spec.bandwidth_subcarriers) / 2;
        const long n = static_cast<long>(ofdm.dft_size);
        if (center - half < -n / 2 || center + half > n / 2)
          throw ConfigError("wideband positions do not fit the DFT grid");
      }
      if (channel.model_drift)
        throw ConfigError("wideband mode does not model sampling drift");
    }
  }
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TrialRecord {
  std::uint64_t trial_index = 0;
  double snr_db = 0.0;
  double separation_hz = 0.0;
  double true_offset_hz = 0.0;
  double true_speed_mps = 0.0;
  double est_offset_hz = 0.0;
  double est_speed_mps = 0.0;
  double doppler_error_hz = 0.0;  // (v_hat - v) f_c / c; +inf when failed
  bool failed = false;
};

namespace detail {

/// Exact evaluator of a CP-prefixed reference stream at arbitrary (fractional)
/// sample positions. Each OFDM symbol, cyclic prefix included, is the same
/// finite sum of complex tones, so the stream has a closed-form continuous
/// extension that sampling-clock models can sample directly.
class AnalyticBurstStream {
 public:
  AnalyticBurstStream(std::span<const FrequencyDomainSymbols> grids, const OfdmConfig& grid,
                      std::size_t bursts)
      : dft_size_(grid.dft_size),
        cp_len_(grid.cp_len),
        sym_len_(grid.symbol_len()),
        symbols_per_burst_(grids.size()),
        bursts_(bursts) {
    runs_.resize(grids.size());
    const long n = static_cast<long>(grid.dft_size);
    for (std::size_t s = 0; s < grids.size(); ++s) {
      const auto& values = grids[s].values;
      long k = -n / 2;
      while (k < n / 2) {
        const std::size_t bin = static_cast<std::size_t>(((k % n) + n) % n);
        if (values[bin] != cplx{0.0, 0.0}) {
          Run run;
          run.first_bin = static_cast<double>(k);
          while (k < n / 2) {
            const std::size_t b = static_cast<std::size_t>(((k % n) + n) % n);
            if (values[b] == cplx{0.0, 0.0}) break;
            run.amps.push_back(values[b] / static_cast<double>(n));
            ++k;
          }
          runs_[s].push_back(std::move(run));
        } else {
          ++k;
        }
      }
    }
  }

  std::size_t length() const { return bursts_ * symbols_per_burst_ * sym_len_; }

  /// Value at position tau, measured in nominal sample intervals from the
  /// start of the stream. Zero outside [0, length).
  cplx sample(double tau) const {
    if (tau < 0.0 || tau >= static_cast<double>(length())) return cplx{0.0, 0.0};
    const double burst_len = static_cast<double>(symbols_per_burst_ * sym_len_);
    double local = std::fmod(tau, burst_len);
    std::size_t s = static_cast<std::size_t>(local / static_cast<double>(sym_len_));
    if (s >= symbols_per_burst_) s = symbols_per_burst_ - 1;
    const double in_symbol =
        local - static_cast<double>(s * sym_len_) - static_cast<double>(cp_len_);
    const double nd = static_cast<double>(dft_size_);
    cplx acc{0.0, 0.0};
    for (const auto& run : runs_[s]) {
      const double ang0 = 2.0 * kPi * run.first_bin * in_symbol / nd;
      const double step_ang = 2.0 * kPi * in_symbol / nd;
      cplx w = cplx(std::cos(ang0), std::sin(ang0));
      const cplx step = cplx(std::cos(step_ang), std::sin(step_ang));
      for (const auto& amp : run.amps) {
        acc += amp * w;
        w *= step;
      }
    }
    return acc;
  }

 private:
  struct Run {
    double first_bin = 0.0;
    std::vector<cplx> amps;
  };
  std::size_t dft_size_, cp_len_, sym_len_, symbols_per_burst_, bursts_;
  std::vector<std::vector<Run>> runs_;  // per symbol
};

/// Tap convolution of one burst under zero history (stream head) and under
/// periodic history (any later repetition of the same burst).
inline void tap_convolutions(std::span<const cplx> x, std::span<const ChannelTap> taps,
                             std::vector<cplx>& head, std::vector<cplx>& steady) {
  const std::size_t len = x.size();
  steady.assign(len, cplx{0.0, 0.0});
  for (const auto& tap : taps) {
    const std::size_t d = tap.delay_samples % len;
    for (std::size_t n = 0; n < len; ++n) {
      steady[n] += tap.gain * x[(n + len - d) % len];
    }
  }
  head = steady;
  std::size_t max_delay = 0;
  for (const auto& tap : taps) max_delay = std::max(max_delay, tap.delay_samples);
  for (std::size_t n = 0; n < std::min(max_delay, len); ++n) {
    cplx acc{0.0, 0.0};
    for (const auto& tap : taps) {
      if (n >= tap.delay_samples) acc += tap.gain * x[n - tap.delay_samples];
    }
    head[n] = acc;
  }
}

/// Narrowband receive chain for one (position, antenna): the burst repeats
/// bursts_per_trial times, the composite ramp continues across repetitions
/// (ramp(n + rL) = ramp(n) ramp(rL)), noise is drawn per sample in stream
/// order. Differential products are accumulated per CP-stripped symbol, either
/// into one combined metric or into per-burst slots.
inline void accumulate_position_antenna(
    std::span<const cplx> x, const std::vector<cplx>& head, const std::vector<cplx>& steady,
    double composite_hz, const OfdmConfig& grid, std::size_t bursts, double snr_db,
    std::size_t lag, Rng& rng, std::span<MetricAccumulation> per_burst) {
  const std::size_t burst_len = x.size();
  const std::size_t sym_len = grid.symbol_len();
  const double ts = grid.sample_interval_s();

  std::vector<cplx> ramp(burst_len);
  {
    constexpr std::size_t kBlock = 4096;
    const cplx step = std::polar(1.0, 2.0 * kPi * composite_hz * ts);
    for (std::size_t base = 0; base < burst_len; base += kBlock) {
      cplx phasor = std::polar(1.0, 2.0 * kPi * composite_hz * ts * static_cast<double>(base));
      const std::size_t stop = std::min(burst_len, base + kBlock);
      for (std::size_t n = base; n < stop; ++n) {
        ramp[n] = phasor;
        phasor *= step;
      }
    }
  }

  std::vector<cplx> u_head(burst_len), u_steady(burst_len);
  for (std::size_t n = 0; n < burst_len; ++n) {
    u_head[n] = ramp[n] * head[n];
    u_steady[n] = ramp[n] * steady[n];
  }

  // SNR reference: mean power of the whole received reference stream (head
  // burst plus bursts-1 steady repetitions), as add_noise would measure it.
  double power = 0.0;
  for (const auto& v : u_head) power += std::norm(v);
  if (bursts > 1) {
    double steady_power = 0.0;
    for (const auto& v : u_steady) steady_power += std::norm(v);
    power += static_cast<double>(bursts - 1) * steady_power;
  }
  power /= static_cast<double>(burst_len * bursts);
  const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
  const double sigma = noiseless ? 0.0 : std::sqrt(power * std::pow(10.0, -snr_db / 10.0) / 2.0);

  const cplx burst_step =
      std::polar(1.0, 2.0 * kPi * composite_hz * ts * static_cast<double>(burst_len));
  cplx burst_rot{1.0, 0.0};
  std::vector<cplx> window(grid.dft_size);
  for (std::size_t r = 0; r < bursts; ++r) {
    const auto& u = (r == 0) ? u_head : u_steady;
    MetricAccumulation& acc = per_burst[per_burst.size() == 1 ? 0 : r];
    for (std::size_t idx = 0; idx < burst_len; ++idx) {
      cplx w{0.0, 0.0};
      if (!noiseless) w = cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
      const std::size_t in_sym = idx % sym_len;
      if (in_sym < grid.cp_len) continue;  // prefix samples carry no metric pairs
      const cplx y = burst_rot * u[idx] + w;
      const cplx z = std::conj(x[idx]) * y;
      const std::size_t body = in_sym - grid.cp_len;
      window[body] = z;
      acc.z_energy += std::norm(z);
      if (body >= lag) acc.metric += std::conj(window[body - lag]) * z;
    }
    burst_rot *= burst_step;
  }
}

/// Narrowband receive chain when sampling drift is modeled: the converter
/// clock runs at alpha (f_c - offset), so sample m sits at m T_s'/T_s nominal
/// intervals; both the reference stream and the ramp are evaluated there.
inline void accumulate_position_antenna_drift(
    const AnalyticBurstStream& stream, std::span<const ChannelTap> taps, double composite_hz,
    double interval_ratio, const OfdmConfig& grid, std::size_t bursts, double snr_db,
    std::size_t lag, std::span<const cplx> x_nominal, Rng& rng,
    std::span<MetricAccumulation> per_burst) {
  const std::size_t burst_len = x_nominal.size();
  const std::size_t sym_len = grid.symbol_len();
  const double ts = grid.sample_interval_s();
  const std::size_t total = burst_len * bursts;

  double power = 0.0;
  const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
  double sigma = 0.0;
  if (!noiseless) {
    // SNR is defined against the undrifted per-antenna signal power; the
    // clock perturbation is of order 1e-5 and does not change the power.
    for (std::size_t n = 0; n < burst_len; ++n) {
      cplx acc{0.0, 0.0};
      for (const auto& tap : taps) {
        acc += tap.gain *
               stream.sample(static_cast<double>(n) - static_cast<double>(tap.delay_samples));
      }
      power += std::norm(acc);
    }
    power /= static_cast<double>(burst_len);
    sigma = std::sqrt(power * std::pow(10.0, -snr_db / 10.0) / 2.0);
  }

  std::vector<cplx> window(grid.dft_size);
  for (std::size_t m = 0; m < total; ++m) {
    cplx w{0.0, 0.0};
    if (!noiseless) w = cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
    const std::size_t in_sym = m % sym_len;
    if (in_sym < grid.cp_len) continue;
    const double t = static_cast<double>(m) * interval_ratio;
    cplx val{0.0, 0.0};
    for (const auto& tap : taps) {
      val += tap.gain * stream.sample(t - static_cast<double>(tap.delay_samples));
    }
    const double ang = 2.0 * kPi * composite_hz * t * ts;
    const cplx y = cplx(std::cos(ang), std::sin(ang)) * val + w;
    const cplx z = std::conj(x_nominal[m % burst_len]) * y;
    const std::size_t body = in_sym - grid.cp_len;
    window[body] = z;
    MetricAccumulation& acc = per_burst[per_burst.size() == 1 ? 0 : m / burst_len];
    acc.z_energy += std::norm(z);
    if (body >= lag) acc.metric += std::conj(window[body - lag]) * z;
  }
}

}  // namespace detail

/// Runs one seeded trial of one sweep cell. Deterministic in
/// (seed, snr_index, sep_index, trial_index) regardless of scheduling.
inline TrialRecord run_trial(const CampaignConfig& cfg, double snr_db,
                             const PositionCell& cell, std::size_t snr_index,
                             std::size_t sep_index, std::uint64_t trial_index) {
  const OfdmConfig& grid = cfg.ofdm;
  const EstimatorConfig est_cfg = resolved_estimator(cfg);
  Rng rng(derive_seed(cfg.seed, snr_index, sep_index, trial_index));

  TrialRecord rec;
  rec.trial_index = trial_index;
  rec.snr_db = snr_db;
  rec.separation_hz = cell.separation_hz;
  rec.true_offset_hz =
      rng.uniform(cfg.channel.freq_offset_ppm[0], cfg.channel.freq_offset_ppm[1]) * 1e-6 *
      grid.carrier_freq_hz;
  rec.true_speed_mps = rng.uniform(cfg.channel.doppler_ppm[0], cfg.channel.doppler_ppm[1]) *
                       1e-6 * kSpeedOfLightMps;

  ChannelConfig chan;
  chan.relative_speed_mps = rec.true_speed_mps;
  chan.freq_offset_hz = rec.true_offset_hz;
  chan.taps = cfg.channel.taps;
  chan.num_rx = cfg.channel.num_rx;
  chan.sampling_ratio = cfg.channel.sampling_ratio;
  chan.model_drift = cfg.channel.model_drift;

  const std::size_t bursts = cfg.refsig.bursts_per_trial;
  const bool per_burst_mode = cfg.combining == BurstCombining::kPerBurstIir && bursts > 1;
  const std::size_t slots = per_burst_mode ? bursts : 1;

  try {
    const std::size_t num_positions = cell.offsets_hz.size();
    // metrics[slot][position]
    std::vector<std::vector<MetricAccumulation>> metrics(
        slots, std::vector<MetricAccumulation>(num_positions));
    std::vector<double> offsets = cell.offsets_hz;

    if (cfg.mode == SimulationMode::kNarrowband) {
      for (std::size_t p = 0; p < num_positions; ++p) {
        const ReferenceSignalSpec spec = position_spec(cfg, offsets[p], p);
        const ReferenceBurst burst = generate(spec, grid);
        const double composite = composite_offset_hz(
            rec.true_offset_hz, rec.true_speed_mps, grid.carrier_freq_hz + offsets[p]);
        const ChannelRealization real = realize_channel(chan, grid, rng);

        std::vector<cplx> head, steady;
        std::vector<MetricAccumulation> column(slots);
        std::optional<detail::AnalyticBurstStream> stream;
        double interval_ratio = 1.0;
        if (real.model_drift) {
          stream.emplace(burst.grids, grid, bursts);
          interval_ratio =
              grid.carrier_freq_hz / (grid.carrier_freq_hz - rec.true_offset_hz);
          if (!(interval_ratio > 0.99 && interval_ratio < 1.01))
            throw ConfigError("sampling drift outside the perturbation window");
        }
        for (std::size_t a = 0; a < real.antenna_taps.size(); ++a) {
          for (auto& slot : column) slot = MetricAccumulation{};
          if (real.model_drift) {
            detail::accumulate_position_antenna_drift(
                *stream, real.antenna_taps[a], composite, interval_ratio, grid, bursts, snr_db,
                est_cfg.lag, burst.time.samples, rng, column);
          } else {
            detail::tap_convolutions(burst.time.samples, real.antenna_taps[a], head, steady);
            detail::accumulate_position_antenna(burst.time.samples, head, steady, composite,
                                                grid, bursts, snr_db, est_cfg.lag, rng, column);
          }
          for (std::size_t s = 0; s < slots; ++s) {
            metrics[s][p].metric += column[s].metric;
            metrics[s][p].z_energy += column[s].z_energy;
          }
        }
      }
    } else {
      // Wideband: both positions share one grid; Doppler acts as a carrier
      // ramp plus a time scaling of the transmitted waveform, and each
      // position is taken out with the band-pass extractor.
      std::vector<long> centers(num_positions);
      std::vector<ReferenceBurst> per_position(num_positions);
      std::vector<FrequencyDomainSymbols> combined(cfg.refsig.num_symbols);
      for (auto& sym : combined) sym.values.assign(grid.dft_size, cplx{0.0, 0.0});
      for (std::size_t p = 0; p < num_positions; ++p) {
        const ReferenceSignalSpec spec = position_spec(cfg, offsets[p], p);
        centers[p] =
            static_cast<long>(std::llround(offsets[p] / grid.subcarrier_spacing_hz));
        per_position[p] = generate(spec, grid, centers[p]);
        for (std::size_t s = 0; s < cfg.refsig.num_symbols; ++s) {
          for (std::size_t k = 0; k < grid.dft_size; ++k) {
            combined[s].values[k] += per_position[p].grids[s].values[k];
          }
        }
      }
      const detail::AnalyticBurstStream stream(combined, grid, bursts);
      const double scale = 1.0 + rec.true_speed_mps / kSpeedOfLightMps;
      const double carrier_composite = composite_offset_hz(
          rec.true_offset_hz, rec.true_speed_mps, grid.carrier_freq_hz);
      const ChannelRealization real = realize_channel(chan, grid, rng);
      const std::size_t burst_len = cfg.refsig.num_symbols * grid.symbol_len();
      const std::size_t total = burst_len * bursts;
      const double ts = grid.sample_interval_s();

      for (std::size_t a = 0; a < real.antenna_taps.size(); ++a) {
        TimeDomainSignal y;
        y.sample_rate_hz = grid.sample_rate_hz();
        y.samples.resize(total);
        for (std::size_t m = 0; m < total; ++m) {
          cplx val{0.0, 0.0};
          for (const auto& tap : real.antenna_taps[a]) {
            val += tap.gain * stream.sample((static_cast<double>(m) -
                                             static_cast<double>(tap.delay_samples)) *
                                            scale);
          }
          const double ang = 2.0 * kPi * carrier_composite * static_cast<double>(m) * ts;
          y.samples[m] = cplx(std::cos(ang), std::sin(ang)) * val;
        }
        y = add_noise(y, snr_db, rng);
        for (std::size_t p = 0; p < num_positions; ++p) {
          const ReferenceSignalSpec spec = position_spec(cfg, offsets[p], p);
          const TimeDomainSignal y_p = extract_position(y, spec, grid, centers[p]);
          // Reference stream for this position, repeated per burst.
          TimeDomainSignal ref;
          ref.sample_rate_hz = grid.sample_rate_hz();
          ref.samples.reserve(total);
          for (std::size_t r = 0; r < bursts; ++r) {
            ref.samples.insert(ref.samples.end(), per_position[p].time.samples.begin(),
                               per_position[p].time.samples.end());
          }
          const auto z = correlate(y_p, ref);
          for (std::size_t r = 0; r < slots; ++r) {
            const std::size_t span_bursts = per_burst_mode ? 1 : bursts;
            const std::size_t begin = per_burst_mode ? r * burst_len : 0;
            const auto acc = symbol_windowed_metric(
                std::span<const cplx>(z.data() + begin, span_bursts * burst_len), grid,
                est_cfg.lag);
            metrics[r][p].metric += acc.metric;
            metrics[r][p].z_energy += acc.z_energy;
          }
        }
      }
    }

    // Solve: either once on the combined metrics or per burst with IIR
    // tracking across bursts (one update per burst).
    JointEstimate state;
    for (std::size_t s = 0; s < slots; ++s) {
      std::vector<PositionMeasurement> meas;
      meas.reserve(num_positions);
      for (std::size_t p = 0; p < num_positions; ++p) {
        meas.push_back(measurement_from_metric(metrics[s][p], offsets[p], est_cfg,
                                               grid.sample_interval_s()));
      }
      const JointSolution sol =
          solve_ls(build_system(meas, grid.carrier_freq_hz, est_cfg), grid.carrier_freq_hz);
      state = (s == 0) ? sol.estimate : iir_update(state, sol.estimate, est_cfg.iir_gamma);
    }

    rec.est_offset_hz = state.freq_offset_hz;
    rec.est_speed_mps = state.speed_mps;
    rec.doppler_error_hz = (state.speed_mps - rec.true_speed_mps) * grid.carrier_freq_hz /
                           kSpeedOfLightMps;
  } catch (const EstimationError&) {
    rec.failed = true;
    rec.est_offset_hz = std::numeric_limits<double>::quiet_NaN();
    rec.est_speed_mps = std::numeric_limits<double>::quiet_NaN();
    rec.doppler_error_hz = std::numeric_limits<double>::infinity();
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Campaign statistics
// ---------------------------------------------------------------------------

struct CellStats {
  double snr_db = 0.0;
  double separation_hz = 0.0;
  std::size_t trials = 0;
  std::size_t failures = 0;
  std::vector<double> abs_error_quantiles_hz;     // aligned with campaign quantile list
  std::vector<double> signed_error_quantiles_hz;  // same convention
  double max_abs_error_hz = 0.0;
  double mean_abs_error_hz = 0.0;
  double within_tolerance_fraction = 0.0;
};

struct CampaignStats {
  std::vector<double> quantiles;
  double tolerance_hz = 0.0;  // 5% of the subcarrier spacing
  std::vector<CellStats> cells;
};

/// Uplink pre-compensation check: the residual Doppler error must stay below
/// 5% of the subcarrier spacing or the corrected uplink would still produce
/// noticeable inter-carrier interference. Failed trials fail the check.
struct PrecompensationCheck {
  bool pass = false;
  double residual_hz = 0.0;
};

inline PrecompensationCheck check_precompensation(const TrialRecord& rec,
                                                  const OfdmConfig& grid) {
  PrecompensationCheck out;
  out.residual_hz = std::abs(rec.doppler_error_hz);
  out.pass = !rec.failed && out.residual_hz <= 0.05 * grid.subcarrier_spacing_hz;
  return out;
}

namespace detail {

inline double quantile_of_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (idx > 0) --idx;
  if (idx >= n) idx = n - 1;
  return sorted[idx];
}

inline CellStats cell_stats_from_records(const std::vector<TrialRecord>& records,
                                         const std::vector<double>& quantiles,
                                         double tolerance_hz) {
  CellStats out;
  out.trials = records.size();
  if (!records.empty()) {
    out.snr_db = records.front().snr_db;
    out.separation_hz = records.front().separation_hz;
  }
  std::vector<double> abs_errs, signed_errs;
  abs_errs.reserve(records.size());
  signed_errs.reserve(records.size());
  double mean = 0.0, max = 0.0;
  std::size_t ok_count = 0, within = 0;
  for (const auto& rec : records) {
    if (rec.failed) {
      ++out.failures;
      abs_errs.push_back(std::numeric_limits<double>::infinity());
      signed_errs.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    const double abs_err = std::abs(rec.doppler_error_hz);
    abs_errs.push_back(abs_err);
    signed_errs.push_back(rec.doppler_error_hz);
    mean += abs_err;
    max = std::max(max, abs_err);
    ++ok_count;
    if (abs_err <= tolerance_hz) ++within;
  }
  std::sort(abs_errs.begin(), abs_errs.end());
  std::sort(signed_errs.begin(), signed_errs.end());
  for (double q : quantiles) {
    out.abs_error_quantiles_hz.push_back(quantile_of_sorted(abs_errs, q));
    out.signed_error_quantiles_hz.push_back(quantile_of_sorted(signed_errs, q));
  }
  out.mean_abs_error_hz =
      ok_count > 0 ? mean / static_cast<double>(ok_count) : std::numeric_limits<double>::infinity();
  out.max_abs_error_hz = ok_count > 0 ? max : std::numeric_limits<double>::infinity();
  out.within_tolerance_fraction =
      records.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(records.size());
  return out;
}

}  // namespace detail

/// Runs trials x sweep grid. Trials are independent and scheduled over a
/// small thread pool; records land in slots keyed by trial index, so the
/// aggregate is identical for any thread count.
inline CampaignStats run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  const auto cells = resolved_position_cells(cfg);
  CampaignStats stats;
  stats.quantiles = cfg.quantiles;
  stats.tolerance_hz = 0.05 * cfg.ofdm.subcarrier_spacing_hz;

  std::size_t workers = cfg.threads != 0 ? cfg.threads : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;

  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      std::vector<TrialRecord> records(cfg.trials);
      std::atomic<std::uint64_t> next{0};
      auto worker = [&]() {
        for (;;) {
          const std::uint64_t t = next.fetch_add(1);
          if (t >= cfg.trials) break;
          records[t] = run_trial(cfg, cfg.snr_db[si], cells[ci], si, ci, t);
        }
      };
      std::vector<std::thread> pool;
      const std::size_t spawn = std::min<std::size_t>(workers, cfg.trials);
      pool.reserve(spawn);
      for (std::size_t w = 0; w < spawn; ++w) pool.emplace_back(worker);
      for (auto& th : pool) th.join();

      stats.cells.push_back(
          detail::cell_stats_from_records(records, cfg.quantiles, stats.tolerance_hz));
      if (cfg.verbose) {
        const auto& cell = stats.cells.back();
        std::cout << "[cell] snr=" << cell.snr_db << " dB sep=" << cell.separation_hz / 1e6
                  << " MHz trials=" << cell.trials << " mean=" << cell.mean_abs_error_hz
                  << " Hz within=" << cell.within_tolerance_fraction * 100.0 << "%"
                  << std::endl;
      }
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest round-trip decimal form; integral values print without exponent
/// so re-runs are byte-identical and the file stays human-readable.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
    return std::string(buf, res.ptr);
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string csv_text(const CampaignStats& stats) {
  std::string out;
  out += "snr_db,separation_hz,quantile,abs_doppler_error_hz\n";
  for (const auto& cell : stats.cells) {
    for (std::size_t qi = 0; qi < stats.quantiles.size(); ++qi) {
      out += detail::format_number(cell.snr_db);
      out += ',';
      out += detail::format_number(cell.separation_hz);
      out += ',';
      out += detail::format_number(stats.quantiles[qi]);
      out += ',';
      out += detail::format_number(cell.abs_error_quantiles_hz[qi]);
      out += '\n';
    }
  }
  out += '\n';
  out +=
      "snr_db,separation_hz,trials,failures,max_abs_error_hz,mean_abs_error_hz,"
      "within_tolerance_fraction,tolerance_hz\n";
  for (const auto& cell : stats.cells) {
    out += detail::format_number(cell.snr_db);
    out += ',';
    out += detail::format_number(cell.separation_hz);
    out += ',';
    out += detail::format_number(static_cast<double>(cell.trials));
    out += ',';
    out += detail::format_number(static_cast<double>(cell.failures));
    out += ',';
    out += detail::format_number(cell.max_abs_error_hz);
    out += ',';
    out += detail::format_number(cell.mean_abs_error_hz);
    out += ',';
    out += detail::format_number(cell.within_tolerance_fraction);
    out += ',';
    out += detail::format_number(stats.tolerance_hz);
    out += '\n';
  }
  return out;
}

inline void emit_csv(const CampaignStats& stats, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output file: " + path);
  file << csv_text(stats);
  if (!file) throw std::runtime_error("failed writing output file: " + path);
}

/// Human-readable per-cell summary for standard output.
inline std::string summary_table(const CampaignStats& stats) {
  std::ostringstream os;
  os << "snr_db  sep_MHz   trials  fail  mean_err_Hz  max_err_Hz  within_"
     << detail::format_number(stats.tolerance_hz) << "Hz\n";
  for (const auto& cell : stats.cells) {
    char line[160];
    std::snprintf(line, sizeof line, "%6.1f  %8.1f  %6zu  %4zu  %11.1f  %10.1f  %8.2f%%\n",
                  cell.snr_db, cell.separation_hz / 1e6, cell.trials, cell.failures,
                  cell.mean_abs_error_hz, cell.max_abs_error_hz,
                  100.0 * cell.within_tolerance_fraction);
    os << line;
  }
  return os.str();
}

}  // namespace ntn
