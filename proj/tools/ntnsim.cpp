// Monte Carlo link simulator for joint Doppler / oscillator-offset estimation
// from reference signals at multiple frequency positions in an OFDM carrier.
//
//   ntnsim run   --config <path> [--seed N] [--trials N] [--out <path>]
//   ntnsim sweep --axis {snr|separation} --config <path> [...]
//   ntnsim check --config <path>
//
// Exit codes: 0 success, 1 configuration error, 2 runtime/IO error.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ntn/config.hpp"
#include "ntn/sim.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t trials = 0;
  bool trials_set = false;
  std::string out_path;
  bool verbose = false;
};

ntn::CampaignConfig load_with_overrides(const CommonOptions& opt) {
  ntn::CampaignConfig cfg =
      opt.config_path.empty() ? ntn::CampaignConfig{} : ntn::load_config(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (opt.trials_set) cfg.trials = opt.trials;
  if (!opt.out_path.empty()) cfg.output_path = opt.out_path;
  if (opt.verbose) cfg.verbose = true;
  cfg.validate();
  return cfg;
}

int run_and_emit(const ntn::CampaignConfig& cfg) {
  const ntn::CampaignStats stats = ntn::run_campaign(cfg);
  ntn::emit_csv(stats, cfg.output_path);
  std::cout << ntn::summary_table(stats);
  std::cout << "wrote " << cfg.output_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OFDM satellite-link Doppler / frequency-offset estimation simulator"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string axis;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* conf = cmd->add_option("--config", opt.config_path, "campaign config file (JSON)");
    if (needs_config) conf->required();
    cmd->add_option("--seed", opt.seed, "override the campaign seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
    cmd->add_option("--trials", opt.trials, "override the trial count per cell")
        ->each([&](const std::string&) { opt.trials_set = true; });
    cmd->add_option("--out", opt.out_path, "override the output CSV path");
    cmd->add_flag("--verbose", opt.verbose, "print per-cell progress");
  };

  CLI::App* run = app.add_subcommand("run", "run the campaign grid defined by the config");
  add_common(run, true);

  CLI::App* sweep =
      app.add_subcommand("sweep", "sweep one axis, collapsing the other to its first value");
  add_common(sweep, true);
  sweep->add_option("--axis", axis, "snr or separation")->required();

  CLI::App* check =
      app.add_subcommand("check", "validate a config and print the resolved settings");
  add_common(check, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      return run_and_emit(load_with_overrides(opt));
    }
    if (sweep->parsed()) {
      ntn::CampaignConfig cfg = load_with_overrides(opt);
      if (axis == "snr") {
        if (!cfg.snr_from_file) cfg.snr_db = ntn::default_snr_sweep_db();
        if (cfg.separation_hz.size() > 1) cfg.separation_hz.resize(1);
      } else if (axis == "separation") {
        if (!cfg.separation_from_file) {
          cfg.position_offsets_hz.reset();
          cfg.separation_hz = ntn::default_separation_sweep_hz();
        }
        if (cfg.snr_db.size() > 1) cfg.snr_db.resize(1);
      } else {
        throw ntn::ConfigError("--axis must be snr or separation");
      }
      cfg.validate();
      return run_and_emit(cfg);
    }
    if (check->parsed()) {
      const ntn::CampaignConfig cfg = load_with_overrides(opt);
      const ntn::EstimatorConfig est = ntn::resolved_estimator(cfg);
      std::cout << ntn::config_to_json(cfg).dump(2) << "\n";
      std::cout << "sample_rate_hz: " << cfg.ofdm.sample_rate_hz() << "\n";
      std::cout << "ambiguity_limit_hz: "
                << ntn::ambiguity_limit_hz(est, cfg.ofdm.sample_interval_s()) << "\n";
      const double worst =
          (std::max(std::abs(cfg.channel.freq_offset_ppm[0]), std::abs(cfg.channel.freq_offset_ppm[1])) +
           std::max(std::abs(cfg.channel.doppler_ppm[0]), std::abs(cfg.channel.doppler_ppm[1]))) *
          1e-6 * cfg.ofdm.carrier_freq_hz;
      std::cout << "worst_case_composite_hz: " << worst << "\n";
      std::cout << "config ok\n";
      return 0;
    }
  } catch (const ntn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
