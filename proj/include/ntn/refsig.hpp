#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ntn/common.hpp"
#include "ntn/errors.hpp"
#include "ntn/ofdm.hpp"
#include "ntn/rng.hpp"

namespace ntn {

/// A known pilot occupying a contiguous block of subcarriers whose center sits
/// at `position_offset_hz` from the carrier. The sequence itself is seeded
/// pseudo-random QPSK; nothing downstream depends on the particular family,
/// only on the receiver knowing it.
struct ReferenceSignalSpec {
  double position_offset_hz = 0.0;        // f_p, signed
  std::size_t bandwidth_subcarriers = 240;  // |S_p|, 20 resource blocks by default
  std::uint64_t sequence_seed = 1;
  std::size_t num_symbols = 4;            // OFDM symbols per burst

  double bandwidth_hz(const OfdmConfig& grid) const {
    return static_cast<double>(bandwidth_subcarriers) * grid.subcarrier_spacing_hz;
  }

  void validate(const OfdmConfig& grid, double carrier_bandwidth_hz) const {
    if (bandwidth_subcarriers == 0 || bandwidth_subcarriers % 2 != 0)
      throw ConfigError("reference signal bandwidth must be a positive even subcarrier count");
    if (bandwidth_subcarriers > grid.dft_size)
      throw ConfigError("reference signal does not fit the DFT grid");
    if (num_symbols == 0) throw ConfigError("reference burst needs at least one OFDM symbol");
    if (std::abs(position_offset_hz) + 0.5 * bandwidth_hz(grid) > 0.5 * carrier_bandwidth_hz)
      throw ConfigError("reference signal does not fit inside the carrier");
  }
};

/// Ordered reference-signal placements inside one carrier.
struct PositionSet {
  std::vector<ReferenceSignalSpec> positions;
  double carrier_freq_hz = 2e9;
  double carrier_bandwidth_hz = 2.1e9;

  void validate(const OfdmConfig& grid) const {
    if (positions.size() < 2)
      throw ConfigError("at least two frequency positions are required");
    for (const auto& spec : positions) spec.validate(grid, carrier_bandwidth_hz);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      for (std::size_t j = i + 1; j < positions.size(); ++j) {
        const double gap =
            std::abs(positions[i].position_offset_hz - positions[j].position_offset_hz);
        if (gap == 0.0) throw ConfigError("frequency positions must be distinct");
        const double half_sum =
            0.5 * (positions[i].bandwidth_hz(grid) + positions[j].bandwidth_hz(grid));
        if (gap < half_sum) throw ConfigError("reference signal bands overlap");
      }
    }
  }
};

/// A generated reference burst: per-symbol frequency grids plus the
/// concatenated CP-prefixed time signal.
struct ReferenceBurst {
  std::vector<FrequencyDomainSymbols> grids;
  TimeDomainSignal time;
};

/// Signed subcarrier indices occupied by the signal when centered at
/// `center_subcarrier` (k > N/2 wraps to negative frequencies on the grid).
inline std::vector<long> occupied_subcarriers(const ReferenceSignalSpec& spec,
                                              long center_subcarrier) {
  std::vector<long> out;
  out.reserve(spec.bandwidth_subcarriers);
  const long half = static_cast<long>(spec.bandwidth_subcarriers) / 2;
  for (long k = -half; k < half; ++k) out.push_back(center_subcarrier + k);
  return out;
}

/// Deterministic unit-magnitude QPSK burst on the occupied subcarriers,
/// zeros elsewhere. In the per-position baseband the signal is centered at
/// DC (center_subcarrier = 0); a wideband grid places it at f_p / B.
///
/// The time-domain burst can pass through zero, so callers must not assume
/// |x_p[n]| > 0 everywhere.
inline ReferenceBurst generate(const ReferenceSignalSpec& spec, const OfdmConfig& grid,
                               long center_subcarrier = 0) {
  grid.validate();
  if (spec.bandwidth_subcarriers == 0 || spec.bandwidth_subcarriers % 2 != 0)
    throw ConfigError("reference signal bandwidth must be a positive even subcarrier count");
  const long n = static_cast<long>(grid.dft_size);
  const long half = static_cast<long>(spec.bandwidth_subcarriers) / 2;
  if (center_subcarrier - half < -n / 2 || center_subcarrier + half > n / 2)
    throw ConfigError("reference signal does not fit the DFT grid at this center");

  Rng rng(spec.sequence_seed);
  ReferenceBurst burst;
  burst.grids.resize(spec.num_symbols);
  const double amp = 1.0 / std::sqrt(2.0);
  for (auto& sym : burst.grids) {
    sym.values.assign(grid.dft_size, cplx{0.0, 0.0});
    for (long k : occupied_subcarriers(spec, center_subcarrier)) {
      const std::uint64_t bits = rng.next_u64();
      const double re = (bits & 1) ? -amp : amp;
      const double im = (bits & 2) ? -amp : amp;
      const std::size_t bin = static_cast<std::size_t>(((k % n) + n) % n);
      sym.values[bin] = cplx(re, im);
    }
  }
  burst.time = modulate_burst(burst.grids, grid);
  return burst;
}

/// Band-pass extraction of one position: per OFDM symbol, the CP-stripped
/// body is transformed, bins outside the position's subcarrier range are
/// zeroed, and the symbol is transformed back. The cyclic prefix region is
/// rebuilt from the filtered tail so the output stays index-aligned with the
/// input (no decimation). Trailing samples that do not form a whole symbol
/// are zeroed.
inline TimeDomainSignal extract_position(const TimeDomainSignal& y,
                                         const ReferenceSignalSpec& spec,
                                         const OfdmConfig& grid,
                                         long center_subcarrier = 0) {
  grid.validate();
  const std::size_t sym_len = grid.symbol_len();
  if (y.samples.size() < sym_len)
    throw InputError("extraction needs at least one full OFDM symbol");

  std::vector<bool> keep(grid.dft_size, false);
  const long n = static_cast<long>(grid.dft_size);
  for (long k : occupied_subcarriers(spec, center_subcarrier)) {
    keep[static_cast<std::size_t>(((k % n) + n) % n)] = true;
  }

  TimeDomainSignal out;
  out.sample_rate_hz = y.sample_rate_hz;
  out.samples.assign(y.samples.size(), cplx{0.0, 0.0});
  const Fft fft(grid.dft_size);
  std::vector<cplx> body(grid.dft_size);
  const std::size_t whole_symbols = y.samples.size() / sym_len;
  for (std::size_t s = 0; s < whole_symbols; ++s) {
    const std::size_t base = s * sym_len;
    for (std::size_t i = 0; i < grid.dft_size; ++i) body[i] = y.samples[base + grid.cp_len + i];
    fft.forward(body);
    for (std::size_t k = 0; k < grid.dft_size; ++k) {
      if (!keep[k]) body[k] = cplx{0.0, 0.0};
    }
    fft.inverse(body);
    for (std::size_t i = 0; i < grid.dft_size; ++i) out.samples[base + grid.cp_len + i] = body[i];
    for (std::size_t i = 0; i < grid.cp_len; ++i) {
      out.samples[base + i] = body[grid.dft_size - grid.cp_len + i];
    }
  }
  return out;
}

}  // namespace ntn
