// Acceptance suite: end-to-end checks of the estimator pipeline and the
// Monte Carlo harness against the target error statistics. Campaign-level
// criteria run 2000 trials per sweep cell and take several minutes on a small
// machine; each criterion prints one PASS/FAIL line.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <cstdio>
#include <string>
#include <vector>

#include "ntn/channel.hpp"
#include "ntn/estimator.hpp"
#include "ntn/ofdm.hpp"
#include "ntn/refsig.hpp"
#include "ntn/rng.hpp"
#include "ntn/sim.hpp"

using ntn::cplx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void report(int criterion, bool ok, const std::string& what) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << ": " << what
            << std::endl;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ntn::CampaignConfig flat_noiseless_config() {
  ntn::CampaignConfig cfg;
  cfg.channel.taps = {ntn::ChannelTap{0, cplx{1.0, 0.0}, true}};
  cfg.channel.num_rx = 1;
  cfg.refsig.bursts_per_trial = 1;
  cfg.snr_db = {kInf};
  cfg.threads = 2;
  return cfg;
}

// Campaign results shared by the statistical criteria; computed once.
struct CampaignResults {
  ntn::CampaignStats separation_sweep;
  ntn::CampaignStats snr_sweep;
  std::string fig3_csv_first;
  std::string fig3_csv_second;
  ntn::CampaignStats fig3_cell;
  double fig3_runtime_s = 0.0;
};

const CampaignResults& campaigns() {
  static const CampaignResults results = [] {
    CampaignResults r;

    ntn::CampaignConfig sep;
    sep.snr_db = {-3.0};
    sep.separation_hz = ntn::default_separation_sweep_hz();
    sep.trials = 2000;
    sep.seed = 61;
    std::cout << "... running separation sweep (7 cells x 2000 trials)" << std::endl;
    r.separation_sweep = ntn::run_campaign(sep);

    ntn::CampaignConfig snr;
    snr.snr_db = ntn::default_snr_sweep_db();
    snr.separation_hz = {288e6};
    snr.trials = 2000;
    snr.seed = 62;
    std::cout << "... running SNR sweep (5 cells x 2000 trials)" << std::endl;
    r.snr_sweep = ntn::run_campaign(snr);

    ntn::CampaignConfig fig3;
    fig3.snr_db = {-3.0};
    fig3.separation_hz = {864e6};
    fig3.trials = 2000;
    fig3.seed = 63;
    std::cout << "... running the 864 MHz / -3 dB cell twice (reproducibility)" << std::endl;
    const auto start = std::chrono::steady_clock::now();
    r.fig3_cell = ntn::run_campaign(fig3);
    r.fig3_runtime_s = elapsed_s(start);
    r.fig3_csv_first = ntn::csv_text(r.fig3_cell);
    r.fig3_csv_second = ntn::csv_text(ntn::run_campaign(fig3));
    return r;
  }();
  return results;
}

/// Non-increasing sequence check allowing one inversion below 5% relative.
bool trend_non_increasing(const std::vector<double>& means, std::string& detail) {
  std::size_t inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] > means[i - 1]) {
      ++inversions;
      if ((means[i] - means[i - 1]) / means[i - 1] >= 0.05) small = false;
    }
  }
  detail += " [";
  for (std::size_t i = 0; i < means.size(); ++i) {
    detail += (i ? " " : "") + std::to_string(static_cast<long long>(means[i]));
  }
  detail += "]";
  return inversions <= 1 && small;
}

}  // namespace

TEST_CASE("criterion 1: noiseless oracle equivalence") {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = flat_noiseless_config();
  const auto cells = ntn::resolved_position_cells(cfg);
  double worst_offset = 0.0, worst_speed = 0.0;
  bool ok = true;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto rec = ntn::run_trial(cfg, kInf, cells[0], 0, 0, t);
    if (rec.failed) ok = false;
    worst_offset = std::max(worst_offset, std::abs(rec.est_offset_hz - rec.true_offset_hz));
    worst_speed = std::max(worst_speed, std::abs(rec.est_speed_mps - rec.true_speed_mps));
  }
  const double seconds = elapsed_s(start);
  ok = ok && worst_offset < 0.1 && worst_speed < 0.01 && seconds < 10.0;
  report(1, ok,
         "noiseless recovery over 100 random draws: max offset error " +
             fmt(worst_offset) + " Hz (< 0.1), max speed error " +
             fmt(worst_speed) + " m/s (< 0.01), " + fmt(seconds) + " s");
  REQUIRE(ok);
}

TEST_CASE("criterion 2: modulate/demodulate round trip") {
  ntn::Rng rng(2024);
  double worst = 0.0;
  for (std::size_t n : {64u, 256u, 1024u}) {
    ntn::OfdmConfig cfg;
    cfg.dft_size = n;
    cfg.cp_len = n / 16;
    for (int rep = 0; rep < 100; ++rep) {
      ntn::FrequencyDomainSymbols sym;
      sym.values.resize(n);
      for (auto& v : sym.values) v = rng.complex_gaussian();
      const auto rx = ntn::demodulate(ntn::modulate(sym, cfg), cfg);
      double num = 0.0, den = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        num += std::norm(rx.values[k] - sym.values[k]);
        den += std::norm(sym.values[k]);
      }
      worst = std::max(worst, std::sqrt(num / den));
    }
  }
  const bool ok = worst < 1e-10;
  report(2, ok,
         "round-trip relative error over 300 random symbol vectors: max " +
             fmt(worst) + " (< 1e-10)");
  REQUIRE(ok);
}

TEST_CASE("criterion 3: interference profile equals the brute-force pipeline") {
  ntn::Rng rng(2025);
  ntn::OfdmConfig cfg;
  cfg.dft_size = 64;
  cfg.cp_len = 8;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const double eps = rng.uniform(-2.0, 2.0);
    const double offset_hz = eps * cfg.subcarrier_spacing_hz;
    ntn::FrequencyDomainSymbols sym;
    sym.values.resize(cfg.dft_size);
    for (auto& v : sym.values) v = std::polar(1.0, rng.uniform(0.0, 2.0 * ntn::kPi));

    const auto matrix = ntn::ici_profile(cfg, offset_hz);
    auto tx = ntn::modulate(sym, cfg);
    for (std::size_t i = 0; i < tx.samples.size(); ++i) {
      const double n = static_cast<double>(i) - static_cast<double>(cfg.cp_len);
      const double ang = 2.0 * ntn::kPi * offset_hz * n * cfg.sample_interval_s();
      tx.samples[i] *= cplx(std::cos(ang), std::sin(ang));
    }
    const auto pipeline = ntn::demodulate(tx, cfg);
    for (std::size_t k = 0; k < cfg.dft_size; ++k) {
      cplx acc{0.0, 0.0};
      for (std::size_t l = 0; l < cfg.dft_size; ++l) {
        acc += matrix[k * cfg.dft_size + l] * sym.values[l];
      }
      worst = std::max(worst, std::abs(acc - pipeline.values[k]));
    }
  }
  const bool ok = worst < 1e-8;
  report(3, ok,
         "analytic leakage matrix vs modulate-ramp-demodulate over 20 offsets: max " +
             fmt(worst) + " (< 1e-8)");
  REQUIRE(ok);
}

TEST_CASE("criterion 4: ambiguity bound and wrap") {
  const ntn::OfdmConfig grid;
  ntn::EstimatorConfig est;
  const double limit = ntn::ambiguity_limit_hz(est, grid.sample_interval_s());
  ntn::ReferenceSignalSpec spec;
  const auto burst = ntn::generate(spec, grid);

  auto measure = [&](double composite) {
    ntn::ChannelRealization real;
    real.freq_offset_hz = composite;
    real.antenna_taps = {{ntn::ChannelTap{0, cplx{1.0, 0.0}, false}}};
    const auto y = ntn::apply_channel_single(burst.time, real.antenna_taps[0], real,
                                             grid.carrier_freq_hz, grid);
    return ntn::per_position_estimate(ntn::correlate(y, burst.time), 0.0, est, grid)
        .composite_estimate_hz;
  };

  const double in_range = 0.99 * limit;
  const double in_err = std::abs(measure(in_range) - in_range);
  const double beyond = 1.04 * limit;
  const double period = 1.0 / (static_cast<double>(est.lag) * grid.sample_interval_s());
  const double wrap_err = std::abs(measure(beyond) - (beyond - period));
  const bool ok = in_err < 1.0 && wrap_err < 1.0;
  report(4, ok,
         "0.99x limit estimates within " + fmt(in_err) +
             " Hz; 1.04x limit wraps by 1/(D Ts) within " + fmt(wrap_err) +
             " Hz (< 1 each)");
  REQUIRE(ok);
}

TEST_CASE("criterion 5: timing drift is negligible and correctable") {
  ntn::CampaignConfig naive;
  naive.channel.model_drift = true;
  naive.channel.num_rx = 2;
  naive.refsig.bursts_per_trial = 1;
  naive.estimator.drift_aware = false;
  naive.threads = 2;
  ntn::CampaignConfig aware = naive;
  aware.estimator.drift_aware = true;
  ntn::CampaignConfig undrifted = naive;
  undrifted.channel.model_drift = false;
  undrifted.estimator.drift_aware = true;

  const double alpha = ntn::resolved_estimator(aware).alpha;
  const auto cells = ntn::resolved_position_cells(naive);
  double worst_pair = 0.0, worst_vs_clean = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    // Same seed and trial index: identical draws, only the solve differs.
    const auto rec_naive = ntn::run_trial(naive, kInf, cells[0], 0, 0, t);
    const auto rec_aware = ntn::run_trial(aware, kInf, cells[0], 0, 0, t);
    const auto rec_clean = ntn::run_trial(undrifted, kInf, cells[0], 0, 0, t);
    worst_pair =
        std::max(worst_pair, std::abs(rec_aware.est_offset_hz - rec_naive.est_offset_hz));
    worst_vs_clean = std::max(worst_vs_clean,
                              std::abs(rec_aware.est_offset_hz - rec_clean.est_offset_hz));
  }
  // The drifted converter also resamples the waveform itself, so the stored
  // reference walks off by ~0.01 samples over a burst; that timing residual
  // (a few Hz, untouched by the drift-aware rows) bounds the comparison
  // against the undrifted channel.
  const bool ok = alpha == Catch::Approx(3.84e-3).margin(1e-12) && worst_pair < 1.0 &&
                  worst_vs_clean < 10.0;
  report(5, ok,
         "alpha = " + fmt(alpha) + "; drift-aware vs drift-naive offset gap max " +
             fmt(worst_pair) + " Hz (< 1, 100 noiseless trials); vs undrifted channel max " +
             fmt(worst_vs_clean) + " Hz (< 10, reference walk-off floor)");
  REQUIRE(ok);
}

TEST_CASE("criterion 6: 864 MHz separation at -3 dB keeps >= 90% within 1.5 kHz") {
  const auto& r = campaigns();
  const auto& cell = r.fig3_cell.cells.at(0);
  const bool ok = cell.within_tolerance_fraction >= 0.90 && r.fig3_runtime_s < 300.0 &&
                  cell.failures == 0;
  report(6, ok,
         "within-fraction " + fmt(cell.within_tolerance_fraction) +
             " (>= 0.90) over 2000 trials, runtime " + fmt(r.fig3_runtime_s) +
             " s (< 300)");
  REQUIRE(ok);
}

TEST_CASE("criterion 7: 288 MHz separation at 5 dB keeps >= 85% within 1.5 kHz") {
  const auto& r = campaigns();
  const ntn::CellStats* cell = nullptr;
  for (const auto& c : r.snr_sweep.cells) {
    if (c.snr_db == 5.0) cell = &c;
  }
  REQUIRE(cell != nullptr);
  const bool ok = cell->within_tolerance_fraction >= 0.85;
  report(7, ok,
         "within-fraction " + fmt(cell->within_tolerance_fraction) +
             " (>= 0.85) over 2000 trials");
  REQUIRE(ok);
}

TEST_CASE("criterion 8: error trends across separation and SNR") {
  const auto& r = campaigns();
  std::vector<double> sep_means, snr_means;
  for (const auto& c : r.separation_sweep.cells) sep_means.push_back(c.mean_abs_error_hz);
  for (const auto& c : r.snr_sweep.cells) snr_means.push_back(c.mean_abs_error_hz);

  std::string detail = "mean |error| Hz vs separation";
  bool ok = trend_non_increasing(sep_means, detail);
  detail += ", vs SNR";
  ok = trend_non_increasing(snr_means, detail) && ok;

  // Mean below the pre-compensation bound from 576 MHz up (at -3 dB) and
  // from 1 dB up (at 288 MHz).
  for (std::size_t i = 0; i < r.separation_sweep.cells.size(); ++i) {
    if (r.separation_sweep.cells[i].separation_hz >= 576e6 && sep_means[i] >= 1500.0) ok = false;
  }
  for (std::size_t i = 0; i < r.snr_sweep.cells.size(); ++i) {
    if (r.snr_sweep.cells[i].snr_db >= 1.0 && snr_means[i] >= 1500.0) ok = false;
  }
  report(8, ok, detail + "; non-increasing (<= 1 small inversion) and below 1.5 kHz bounds");
  REQUIRE(ok);
}

TEST_CASE("criterion 9: IIR tracking filter") {
  const ntn::JointEstimate prev{10.0, 100.0, 2e9};
  const ntn::JointEstimate fresh{-20.0, 4321.0, 2e9};
  const auto hold = ntn::iir_update(prev, fresh, 0.0);
  const auto pass = ntn::iir_update(prev, fresh, 1.0);
  bool ok = hold.freq_offset_hz == prev.freq_offset_hz && hold.speed_mps == prev.speed_mps &&
            pass.freq_offset_hz == fresh.freq_offset_hz && pass.speed_mps == fresh.speed_mps;

  const double gamma = 0.37;
  ntn::JointEstimate state{5000.0, -6000.0, 2e9};
  const ntn::JointEstimate target{-321.0, 777.0, 2e9};
  const double err0_f = state.freq_offset_hz - target.freq_offset_hz;
  const double err0_v = state.speed_mps - target.speed_mps;
  double worst = 0.0;
  for (int m = 1; m <= 50; ++m) {
    state = ntn::iir_update(state, target, gamma);
    const double decay = std::pow(1.0 - gamma, m);
    worst = std::max(worst, std::abs(state.freq_offset_hz - target.freq_offset_hz -
                                     err0_f * decay) /
                                std::abs(err0_f));
    worst = std::max(worst,
                     std::abs(state.speed_mps - target.speed_mps - err0_v * decay) /
                         std::abs(err0_v));
  }
  ok = ok && worst < 1e-12;
  report(9, ok,
         "endpoint updates exact; geometric decay matches (1-gamma)^m to " +
             fmt(worst) + " relative (< 1e-12) over 50 steps");
  REQUIRE(ok);
}

TEST_CASE("criterion 10: campaign reruns are byte-identical") {
  const auto& r = campaigns();
  const bool ok = !r.fig3_csv_first.empty() && r.fig3_csv_first == r.fig3_csv_second;
  report(10, ok, "two runs of the 864 MHz / -3 dB campaign produce identical CSV bytes");
  REQUIRE(ok);
}
