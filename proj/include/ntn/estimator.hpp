#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ntn/common.hpp"
#include "ntn/errors.hpp"
#include "ntn/ofdm.hpp"
#include "ntn/refsig.hpp"

namespace ntn {

/// Parameters of the differential-phase estimator.
///
/// The lag trades noise averaging against unambiguous range: the composite
/// offset must stay below 1/(2 D T_s). The default of 16 keeps a >3x margin
/// over the worst-case composite of the default scenario (70 kHz vs 240 kHz).
struct EstimatorConfig {
  std::size_t lag = 16;     // differential step D
  double iir_gamma = 0.5;   // tracking filter parameter, [0, 1]
  bool drift_aware = false;
  double alpha = 0.0;       // sampling ratio f_s/f_c, used when drift_aware

  void validate() const {
    if (lag < 1) throw ConfigError("differential lag must be at least 1");
    if (!(iir_gamma >= 0.0 && iir_gamma <= 1.0))
      throw ConfigError("IIR filter parameter must lie in [0, 1]");
    if (drift_aware && !(alpha > 0.0))
      throw ConfigError("drift-aware estimation needs a positive sampling ratio");
  }
};

/// One frequency position's composite-offset measurement.
struct PositionMeasurement {
  double position_offset_hz = 0.0;    // f_p
  double composite_estimate_hz = 0.0; // offset + Doppler at f_c + f_p
  double metric_phase_rad = 0.0;      // principal value in (-pi, pi]
  double metric_magnitude = 0.0;      // quality indicator
};

/// Joint solution of the oscillator offset and the relative speed. The
/// Doppler shift at the carrier is always derived from the speed, never
/// stored, so the two can not drift apart.
struct JointEstimate {
  double freq_offset_hz = 0.0;
  double speed_mps = 0.0;
  double carrier_freq_hz = 0.0;

  double doppler_at_carrier_hz() const {
    return speed_mps * carrier_freq_hz / kSpeedOfLightMps;
  }
};

struct JointSolution {
  JointEstimate estimate;
  double condition_number = 0.0;  // 2-norm condition of the system matrix
};

/// z[n] = x*[n] y[n]: conjugate mix of the received signal with the known
/// reference, leaving the channel phase and the composite offset ramp.
inline std::vector<cplx> correlate(const TimeDomainSignal& received,
                                   const TimeDomainSignal& reference) {
  if (received.samples.size() != reference.samples.size())
    throw InputError("received and reference signals differ in length");
  std::vector<cplx> z(received.samples.size());
  for (std::size_t n = 0; n < z.size(); ++n) {
    z[n] = std::conj(reference.samples[n]) * received.samples[n];
  }
  return z;
}

/// Plain differential metric over the whole sequence: sum_n z*[n-D] z[n].
inline cplx differential_metric(std::span<const cplx> z, std::size_t lag) {
  if (lag < 1) throw ConfigError("differential lag must be at least 1");
  if (z.size() <= lag) throw InputError("sequence too short for the differential lag");
  cplx acc{0.0, 0.0};
  for (std::size_t n = lag; n < z.size(); ++n) acc += std::conj(z[n - lag]) * z[n];
  return acc;
}

struct MetricAccumulation {
  cplx metric{0.0, 0.0};
  double z_energy = 0.0;
};

/// Differential metric restricted to pairs that fall inside the same
/// CP-stripped OFDM symbol. CP removal leaves index gaps where the phase-ramp
/// model does not hold across samples, so pairs straddling a symbol boundary
/// are excluded; contributions from all whole symbols in the buffer are
/// summed. Trailing samples beyond the last whole symbol are ignored.
inline MetricAccumulation symbol_windowed_metric(std::span<const cplx> z,
                                                 const OfdmConfig& grid, std::size_t lag) {
  if (lag < 1 || lag >= grid.dft_size)
    throw ConfigError("differential lag must lie inside one CP-stripped symbol");
  const std::size_t sym_len = grid.symbol_len();
  if (z.size() < sym_len) throw InputError("buffer shorter than one OFDM symbol");
  MetricAccumulation acc;
  const std::size_t whole_symbols = z.size() / sym_len;
  for (std::size_t s = 0; s < whole_symbols; ++s) {
    const std::size_t base = s * sym_len + grid.cp_len;
    for (std::size_t i = 0; i < grid.dft_size; ++i) {
      acc.z_energy += std::norm(z[base + i]);
      if (i >= lag) acc.metric += std::conj(z[base + i - lag]) * z[base + i];
    }
  }
  return acc;
}

/// Largest composite offset the differential phase can represent, 1/(2 D T_s).
inline double ambiguity_limit_hz(const EstimatorConfig& cfg, double sample_interval_s) {
  return 1.0 / (2.0 * static_cast<double>(cfg.lag) * sample_interval_s);
}

/// Turns an accumulated metric into a composite-offset measurement. The phase
/// is the principal value, so the estimate always lies in (-limit, +limit].
/// A metric that has lost essentially all its magnitude carries no usable
/// phase and is reported as a measurement failure.
inline PositionMeasurement measurement_from_metric(const MetricAccumulation& acc,
                                                   double position_offset_hz,
                                                   const EstimatorConfig& cfg,
                                                   double sample_interval_s) {
  cfg.validate();
  if (!(std::abs(acc.metric) > 1e-12 * acc.z_energy))
    throw EstimationError("differential metric has no usable magnitude (signal absent?)");
  PositionMeasurement m;
  m.position_offset_hz = position_offset_hz;
  m.metric_phase_rad = std::arg(acc.metric);
  m.metric_magnitude = std::abs(acc.metric);
  m.composite_estimate_hz =
      m.metric_phase_rad / (2.0 * kPi * static_cast<double>(cfg.lag) * sample_interval_s);
  return m;
}

/// Single-antenna, single-position measurement from a correlated sequence.
inline PositionMeasurement per_position_estimate(std::span<const cplx> z,
                                                 double position_offset_hz,
                                                 const EstimatorConfig& cfg,
                                                 const OfdmConfig& grid) {
  return measurement_from_metric(symbol_windowed_metric(z, grid, cfg.lag), position_offset_hz,
                                 cfg, grid.sample_interval_s());
}

/// P x 2 linear system tying the per-position composites to (offset, speed).
struct LinearSystem {
  std::vector<std::array<double, 2>> rows;
  std::vector<double> rhs;
};

/// Row p is [1, (f_c + f_p)/c] with the measured composite on the right-hand
/// side. When drift awareness is on, the first column becomes
/// 1 + alpha * phase_p / (2 pi D), which absorbs the sampling-clock error that
/// scales every measured phase by T_s'/T_s.
inline LinearSystem build_system(std::span<const PositionMeasurement> measurements,
                                 double carrier_freq_hz, const EstimatorConfig& cfg) {
  cfg.validate();
  if (measurements.size() < 2)
    throw EstimationError("underdetermined: at least two frequency positions are required");
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    for (std::size_t j = i + 1; j < measurements.size(); ++j) {
      if (measurements[i].position_offset_hz == measurements[j].position_offset_hz)
        throw EstimationError("rank deficient: duplicate frequency positions");
    }
  }
  LinearSystem sys;
  sys.rows.reserve(measurements.size());
  sys.rhs.reserve(measurements.size());
  for (const auto& m : measurements) {
    double first = 1.0;
    if (cfg.drift_aware) {
      first += cfg.alpha * m.metric_phase_rad / (2.0 * kPi * static_cast<double>(cfg.lag));
    }
    sys.rows.push_back({first, (carrier_freq_hz + m.position_offset_hz) / kSpeedOfLightMps});
    sys.rhs.push_back(m.composite_estimate_hz);
  }
  return sys;
}

/// Least squares through the 2 x 2 normal equations with an explicit inverse;
/// exact for P = 2. The condition number makes the position-separation
/// sensitivity visible to callers.
inline JointSolution solve_ls(const LinearSystem& sys, double carrier_freq_hz) {
  if (sys.rows.size() < 2 || sys.rows.size() != sys.rhs.size())
    throw EstimationError("underdetermined least-squares system");
  double a00 = 0.0, a01 = 0.0, a11 = 0.0, b0 = 0.0, b1 = 0.0;
  for (std::size_t p = 0; p < sys.rows.size(); ++p) {
    const double r0 = sys.rows[p][0];
    const double r1 = sys.rows[p][1];
    a00 += r0 * r0;
    a01 += r0 * r1;
    a11 += r1 * r1;
    b0 += r0 * sys.rhs[p];
    b1 += r1 * sys.rhs[p];
  }
  const double det = a00 * a11 - a01 * a01;
  if (!(det > a00 * a11 * 1e-24))
    throw EstimationError("rank deficient: frequency positions do not separate the unknowns");
  JointSolution sol;
  sol.estimate.carrier_freq_hz = carrier_freq_hz;
  sol.estimate.freq_offset_hz = (a11 * b0 - a01 * b1) / det;
  sol.estimate.speed_mps = (a00 * b1 - a01 * b0) / det;
  const double tr = a00 + a11;
  const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  const double lmax = 0.5 * (tr + disc);
  const double lmin = 0.5 * (tr - disc);
  sol.condition_number = std::sqrt(lmax / lmin);
  return sol;
}

/// First-order IIR tracking update: (1 - gamma) * previous + gamma * fresh.
inline JointEstimate iir_update(const JointEstimate& prev, const JointEstimate& fresh,
                                double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw InputError("IIR filter parameter must lie in [0, 1]");
  if (prev.carrier_freq_hz != fresh.carrier_freq_hz)
    throw InputError("IIR update mixes estimates for different carriers");
  JointEstimate out;
  out.carrier_freq_hz = fresh.carrier_freq_hz;
  out.freq_offset_hz = (1.0 - gamma) * prev.freq_offset_hz + gamma * fresh.freq_offset_hz;
  out.speed_mps = (1.0 - gamma) * prev.speed_mps + gamma * fresh.speed_mps;
  return out;
}

/// One position as seen by the receiver: the known reference burst and the
/// per-antenna received component, index-aligned with the reference.
struct PositionObservation {
  ReferenceSignalSpec spec;
  TimeDomainSignal reference;
  std::vector<TimeDomainSignal> received;
};

struct EstimateReport {
  JointEstimate estimate;
  std::vector<PositionMeasurement> measurements;
  double condition_number = 0.0;
};

/// End-to-end joint estimation: per position, correlate each antenna against
/// the known reference, sum the differential metrics across antennas, take
/// the phase once on the combined metric, then solve the position system.
/// A failed measurement at any position fails the whole estimate.
inline EstimateReport estimate(std::span<const PositionObservation> observations,
                               double carrier_freq_hz, const EstimatorConfig& cfg,
                               const OfdmConfig& grid) {
  cfg.validate();
  std::vector<PositionMeasurement> measurements;
  measurements.reserve(observations.size());
  for (const auto& obs : observations) {
    if (obs.received.empty()) throw InputError("observation carries no antenna signals");
    MetricAccumulation combined;
    for (const auto& antenna : obs.received) {
      const auto z = correlate(antenna, obs.reference);
      const auto acc = symbol_windowed_metric(z, grid, cfg.lag);
      combined.metric += acc.metric;
      combined.z_energy += acc.z_energy;
    }
    measurements.push_back(measurement_from_metric(combined, obs.spec.position_offset_hz, cfg,
                                                   grid.sample_interval_s()));
  }
  const LinearSystem sys = build_system(measurements, carrier_freq_hz, cfg);
  const JointSolution sol = solve_ls(sys, carrier_freq_hz);
  EstimateReport report;
  report.estimate = sol.estimate;
  report.measurements = std::move(measurements);
  report.condition_number = sol.condition_number;
  return report;
}

}  // namespace ntn
