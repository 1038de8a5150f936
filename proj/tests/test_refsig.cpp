#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "ntn/refsig.hpp"
#include "ntn/rng.hpp"

using ntn::cplx;

namespace {

ntn::OfdmConfig default_grid() { return ntn::OfdmConfig{}; }

double energy(const std::vector<cplx>& v) {
  double e = 0.0;
  for (const auto& s : v) e += std::norm(s);
  return e;
}

ntn::TimeDomainSignal random_signal(std::size_t len, double rate, ntn::Rng& rng) {
  ntn::TimeDomainSignal sig;
  sig.sample_rate_hz = rate;
  sig.samples.resize(len);
  for (auto& v : sig.samples) v = rng.complex_gaussian();
  return sig;
}

}  // namespace

TEST_CASE("generation is deterministic in the sequence seed") {
  const auto grid = default_grid();
  ntn::ReferenceSignalSpec spec;
  spec.sequence_seed = 77;
  const auto a = ntn::generate(spec, grid);
  const auto b = ntn::generate(spec, grid);
  REQUIRE(a.grids.size() == b.grids.size());
  for (std::size_t s = 0; s < a.grids.size(); ++s) {
    for (std::size_t k = 0; k < a.grids[s].values.size(); ++k) {
      CHECK(a.grids[s].values[k] == b.grids[s].values[k]);
    }
  }
  for (std::size_t n = 0; n < a.time.samples.size(); ++n) {
    CHECK(a.time.samples[n] == b.time.samples[n]);
  }
}

TEST_CASE("default burst occupies exactly 240 unit-magnitude subcarriers") {
  const auto grid = default_grid();
  ntn::ReferenceSignalSpec spec;
  const auto burst = ntn::generate(spec, grid);
  REQUIRE(burst.grids.size() == 4);
  REQUIRE(burst.time.samples.size() == 4 * grid.symbol_len());
  for (const auto& sym : burst.grids) {
    std::size_t occupied = 0;
    double power = 0.0;
    for (const auto& v : sym.values) {
      if (v != cplx{0.0, 0.0}) {
        ++occupied;
        CHECK(std::abs(v) == Catch::Approx(1.0).margin(1e-12));
      }
      power += std::norm(v);
    }
    CHECK(occupied == 240);
    CHECK(power == Catch::Approx(240.0).margin(1e-9));
  }
}

TEST_CASE("distinct seeds give weakly correlated sequences") {
  const auto grid = default_grid();
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    ntn::ReferenceSignalSpec sa, sb;
    sa.sequence_seed = seed;
    sb.sequence_seed = seed + 100;
    const auto a = ntn::generate(sa, grid);
    const auto b = ntn::generate(sb, grid);
    cplx cross{0.0, 0.0};
    double pa = 0.0, pb = 0.0;
    for (std::size_t k = 0; k < grid.dft_size; ++k) {
      cross += a.grids[0].values[k] * std::conj(b.grids[0].values[k]);
      pa += std::norm(a.grids[0].values[k]);
      pb += std::norm(b.grids[0].values[k]);
    }
    CHECK(std::abs(cross) / std::sqrt(pa * pb) < 0.2);
  }
}

TEST_CASE("spec validation enforces carrier and grid bounds") {
  const auto grid = default_grid();
  ntn::ReferenceSignalSpec spec;
  spec.position_offset_hz = 1.048e9;  // band edge beyond half of a 2.1 GHz carrier
  CHECK_THROWS_AS(spec.validate(grid, 2.1e9), ntn::ConfigError);
  spec.position_offset_hz = 0.0;
  spec.bandwidth_subcarriers = 241;  // odd
  CHECK_THROWS_AS(spec.validate(grid, 2.1e9), ntn::ConfigError);
  spec.bandwidth_subcarriers = 512;  // larger than the DFT grid
  CHECK_THROWS_AS(spec.validate(grid, 2.1e9), ntn::ConfigError);
  spec.bandwidth_subcarriers = 240;
  CHECK_NOTHROW(spec.validate(grid, 2.1e9));
  // A wideband placement must fit the grid too.
  CHECK_THROWS_AS(ntn::generate(spec, grid, 64), ntn::ConfigError);
}

TEST_CASE("position sets need two distinct non-overlapping entries") {
  const auto grid = default_grid();
  ntn::PositionSet set;
  set.positions.resize(1);
  CHECK_THROWS_AS(set.validate(grid), ntn::ConfigError);
  set.positions.resize(2);
  set.positions[0].position_offset_hz = -432e6;
  set.positions[1].position_offset_hz = -432e6;
  CHECK_THROWS_AS(set.validate(grid), ntn::ConfigError);
  set.positions[1].position_offset_hz = -432e6 + 1e6;  // closer than the 7.2 MHz band
  CHECK_THROWS_AS(set.validate(grid), ntn::ConfigError);
  set.positions[1].position_offset_hz = 432e6;
  CHECK_NOTHROW(set.validate(grid));
}

TEST_CASE("extraction passes its own band through unchanged") {
  const auto grid = default_grid();
  ntn::ReferenceSignalSpec spec;
  spec.sequence_seed = 5;
  const auto burst = ntn::generate(spec, grid);
  const auto filtered = ntn::extract_position(burst.time, spec, grid);
  REQUIRE(filtered.samples.size() == burst.time.samples.size());
  for (std::size_t n = 0; n < filtered.samples.size(); ++n) {
    CHECK(std::abs(filtered.samples[n] - burst.time.samples[n]) < 1e-10);
  }
  const double ratio = energy(filtered.samples) / energy(burst.time.samples);
  CHECK(std::abs(10.0 * std::log10(ratio)) < 0.1);
  CHECK(ratio >= 0.99);
}

TEST_CASE("extraction rejects a disjoint band by more than 40 dB") {
  auto grid = default_grid();
  ntn::ReferenceSignalSpec in_band, out_band;
  in_band.bandwidth_subcarriers = 96;
  out_band.bandwidth_subcarriers = 96;
  const auto burst = ntn::generate(in_band, grid, -64);
  const auto filtered = ntn::extract_position(burst.time, out_band, grid, 64);
  const double leak = energy(filtered.samples) / energy(burst.time.samples);
  CHECK(10.0 * std::log10(leak + 1e-300) < -40.0);
}

TEST_CASE("extraction of silence is silence") {
  const auto grid = default_grid();
  ntn::ReferenceSignalSpec spec;
  ntn::TimeDomainSignal zero;
  zero.sample_rate_hz = grid.sample_rate_hz();
  zero.samples.assign(grid.symbol_len() * 2, cplx{0.0, 0.0});
  const auto filtered = ntn::extract_position(zero, spec, grid);
  for (const auto& v : filtered.samples) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("extraction is linear") {
  const auto grid = default_grid();
  ntn::ReferenceSignalSpec spec;
  ntn::Rng rng(9);
  const auto u = random_signal(grid.symbol_len() * 3, grid.sample_rate_hz(), rng);
  const auto w = random_signal(grid.symbol_len() * 3, grid.sample_rate_hz(), rng);
  const cplx a{0.7, -1.1};
  const cplx b{-0.2, 0.5};
  ntn::TimeDomainSignal mix;
  mix.sample_rate_hz = u.sample_rate_hz;
  mix.samples.resize(u.samples.size());
  for (std::size_t n = 0; n < mix.samples.size(); ++n) {
    mix.samples[n] = a * u.samples[n] + b * w.samples[n];
  }
  const auto fu = ntn::extract_position(u, spec, grid);
  const auto fw = ntn::extract_position(w, spec, grid);
  const auto fmix = ntn::extract_position(mix, spec, grid);
  for (std::size_t n = 0; n < mix.samples.size(); ++n) {
    CHECK(std::abs(fmix.samples[n] - (a * fu.samples[n] + b * fw.samples[n])) < 1e-10);
  }
}

TEST_CASE("extraction needs at least one full symbol and zeroes trailing rest") {
  const auto grid = default_grid();
  ntn::ReferenceSignalSpec spec;
  ntn::Rng rng(13);
  ntn::TimeDomainSignal tiny = random_signal(grid.symbol_len() - 1, grid.sample_rate_hz(), rng);
  CHECK_THROWS_AS(ntn::extract_position(tiny, spec, grid), ntn::InputError);

  auto padded = ntn::generate(spec, grid).time;
  const std::size_t full = padded.samples.size();
  padded.samples.resize(full + 10, cplx{1.0, 1.0});
  const auto filtered = ntn::extract_position(padded, spec, grid);
  for (std::size_t n = full; n < filtered.samples.size(); ++n) {
    CHECK(filtered.samples[n] == cplx{0.0, 0.0});
  }
}
