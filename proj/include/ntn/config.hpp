#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "ntn/errors.hpp"
#include "ntn/sim.hpp"

namespace ntn {

namespace detail {

using json = nlohmann::json;

inline void expect_keys(const json& obj, const std::string& where,
                        std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
  }
}

inline double number_field(const json& v, const std::string& where) {
  // SNR entries accept the string "inf" as the noiseless flag.
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError(where + ": expected a number or \"inf\"");
  }
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& item : v) out.push_back(number_field(item, where));
  return out;
}

inline void parse_ofdm(const json& obj, OfdmConfig& cfg) {
  expect_keys(obj, "ofdm",
              {"subcarrier_spacing_hz", "dft_size", "cp_len", "carrier_freq_hz"});
  if (obj.contains("subcarrier_spacing_hz"))
    cfg.subcarrier_spacing_hz = number_field(obj["subcarrier_spacing_hz"], "ofdm.subcarrier_spacing_hz");
  if (obj.contains("dft_size")) cfg.dft_size = obj["dft_size"].get<std::size_t>();
  if (obj.contains("cp_len")) cfg.cp_len = obj["cp_len"].get<std::size_t>();
  if (obj.contains("carrier_freq_hz"))
    cfg.carrier_freq_hz = number_field(obj["carrier_freq_hz"], "ofdm.carrier_freq_hz");
}

inline void parse_taps(const json& arr, std::vector<ChannelTap>& taps) {
  if (!arr.is_array() || arr.empty())
    throw ConfigError("channel.taps: expected a non-empty array");
  taps.clear();
  for (const auto& t : arr) {
    expect_keys(t, "channel.taps[]", {"delay_samples", "gain", "los"});
    ChannelTap tap;
    if (t.contains("delay_samples")) tap.delay_samples = t["delay_samples"].get<std::size_t>();
    if (t.contains("gain")) {
      const auto& g = t["gain"];
      if (!g.is_array() || g.size() != 2)
        throw ConfigError("channel.taps[].gain: expected [re, im]");
      tap.gain = cplx(number_field(g[0], "gain"), number_field(g[1], "gain"));
    }
    if (t.contains("los")) tap.line_of_sight = t["los"].get<bool>();
    taps.push_back(tap);
  }
}

inline void parse_channel(const json& obj, ChannelSettings& cfg) {
  expect_keys(obj, "channel",
              {"doppler_ppm", "freq_offset_ppm", "taps", "num_rx", "model_drift",
               "sampling_ratio"});
  if (obj.contains("doppler_ppm")) {
    const auto v = number_list(obj["doppler_ppm"], "channel.doppler_ppm");
    if (v.size() != 2) throw ConfigError("channel.doppler_ppm: expected [low, high]");
    cfg.doppler_ppm = {v[0], v[1]};
  }
  if (obj.contains("freq_offset_ppm")) {
    const auto v = number_list(obj["freq_offset_ppm"], "channel.freq_offset_ppm");
    if (v.size() != 2) throw ConfigError("channel.freq_offset_ppm: expected [low, high]");
    cfg.freq_offset_ppm = {v[0], v[1]};
  }
  if (obj.contains("taps")) parse_taps(obj["taps"], cfg.taps);
  if (obj.contains("num_rx")) cfg.num_rx = obj["num_rx"].get<std::size_t>();
  if (obj.contains("model_drift")) cfg.model_drift = obj["model_drift"].get<bool>();
  if (obj.contains("sampling_ratio"))
    cfg.sampling_ratio = number_field(obj["sampling_ratio"], "channel.sampling_ratio");
}

inline void parse_refsig(const json& obj, RefsigSettings& cfg) {
  expect_keys(obj, "refsig",
              {"bandwidth_subcarriers", "num_symbols", "bursts_per_trial", "sequence_seed"});
  if (obj.contains("bandwidth_subcarriers"))
    cfg.bandwidth_subcarriers = obj["bandwidth_subcarriers"].get<std::size_t>();
  if (obj.contains("num_symbols")) cfg.num_symbols = obj["num_symbols"].get<std::size_t>();
  if (obj.contains("bursts_per_trial"))
    cfg.bursts_per_trial = obj["bursts_per_trial"].get<std::size_t>();
  if (obj.contains("sequence_seed")) cfg.sequence_seed = obj["sequence_seed"].get<std::uint64_t>();
}

inline void parse_estimator(const json& obj, CampaignConfig& cfg) {
  expect_keys(obj, "estimator", {"lag", "iir_gamma", "drift_aware", "alpha", "combining"});
  if (obj.contains("lag")) cfg.estimator.lag = obj["lag"].get<std::size_t>();
  if (obj.contains("iir_gamma"))
    cfg.estimator.iir_gamma = number_field(obj["iir_gamma"], "estimator.iir_gamma");
  if (obj.contains("drift_aware")) cfg.estimator.drift_aware = obj["drift_aware"].get<bool>();
  if (obj.contains("alpha")) cfg.estimator.alpha = number_field(obj["alpha"], "estimator.alpha");
  if (obj.contains("combining")) {
    const std::string mode = obj["combining"].get<std::string>();
    if (mode == "metric") {
      cfg.combining = BurstCombining::kMetricSum;
    } else if (mode == "iir") {
      cfg.combining = BurstCombining::kPerBurstIir;
    } else {
      throw ConfigError("estimator.combining: expected \"metric\" or \"iir\"");
    }
  }
}

}  // namespace detail

/// Parses a campaign config document. Every field is optional and falls back
/// to the documented default; unknown keys are errors so typos do not
/// silently disappear into defaults.
inline CampaignConfig parse_config(const nlohmann::json& doc) {
  using detail::expect_keys;
  using detail::number_field;
  using detail::number_list;

  CampaignConfig cfg;
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  expect_keys(doc, "config root",
              {"ofdm", "carrier_bandwidth_hz", "channel", "refsig", "estimator", "positions",
               "separation_hz", "snr_db", "trials", "seed", "threads", "quantiles", "mode",
               "output_path", "verbose"});
  try {
    if (doc.contains("ofdm")) detail::parse_ofdm(doc["ofdm"], cfg.ofdm);
    if (doc.contains("carrier_bandwidth_hz"))
      cfg.carrier_bandwidth_hz = number_field(doc["carrier_bandwidth_hz"], "carrier_bandwidth_hz");
    if (doc.contains("channel")) detail::parse_channel(doc["channel"], cfg.channel);
    if (doc.contains("refsig")) detail::parse_refsig(doc["refsig"], cfg.refsig);
    if (doc.contains("estimator")) detail::parse_estimator(doc["estimator"], cfg);
    if (doc.contains("positions")) {
      if (doc.contains("separation_hz"))
        throw ConfigError("give either positions.offsets_hz or separation_hz, not both");
      expect_keys(doc["positions"], "positions", {"offsets_hz"});
      if (!doc["positions"].contains("offsets_hz"))
        throw ConfigError("positions: missing offsets_hz");
      cfg.position_offsets_hz = number_list(doc["positions"]["offsets_hz"], "positions.offsets_hz");
      cfg.separation_from_file = true;
    }
    if (doc.contains("separation_hz")) {
      cfg.separation_hz = number_list(doc["separation_hz"], "separation_hz");
      cfg.separation_from_file = true;
    }
    if (doc.contains("snr_db")) {
      cfg.snr_db = number_list(doc["snr_db"], "snr_db");
      cfg.snr_from_file = true;
    }
    if (doc.contains("trials")) cfg.trials = doc["trials"].get<std::size_t>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("threads")) cfg.threads = doc["threads"].get<std::size_t>();
    if (doc.contains("quantiles")) cfg.quantiles = number_list(doc["quantiles"], "quantiles");
    if (doc.contains("mode")) {
      const std::string mode = doc["mode"].get<std::string>();
      if (mode == "narrowband") {
        cfg.mode = SimulationMode::kNarrowband;
      } else if (mode == "wideband") {
        cfg.mode = SimulationMode::kWideband;
      } else {
        throw ConfigError("mode: expected \"narrowband\" or \"wideband\"");
      }
    }
    if (doc.contains("output_path")) cfg.output_path = doc["output_path"].get<std::string>();
    if (doc.contains("verbose")) cfg.verbose = doc["verbose"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline CampaignConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return parse_config(doc);
}

/// Resolved view of a config, defaults filled in; what `check` prints.
inline nlohmann::json config_to_json(const CampaignConfig& cfg) {
  nlohmann::json doc;
  doc["ofdm"] = {{"subcarrier_spacing_hz", cfg.ofdm.subcarrier_spacing_hz},
                 {"dft_size", cfg.ofdm.dft_size},
                 {"cp_len", cfg.ofdm.cp_len},
                 {"carrier_freq_hz", cfg.ofdm.carrier_freq_hz}};
  doc["carrier_bandwidth_hz"] = cfg.carrier_bandwidth_hz;
  nlohmann::json taps = nlohmann::json::array();
  for (const auto& tap : cfg.channel.taps) {
    taps.push_back({{"delay_samples", tap.delay_samples},
                    {"gain", {tap.gain.real(), tap.gain.imag()}},
                    {"los", tap.line_of_sight}});
  }
  doc["channel"] = {{"doppler_ppm", cfg.channel.doppler_ppm},
                    {"freq_offset_ppm", cfg.channel.freq_offset_ppm},
                    {"taps", taps},
                    {"num_rx", cfg.channel.num_rx},
                    {"model_drift", cfg.channel.model_drift},
                    {"sampling_ratio", cfg.channel.sampling_ratio}};
  doc["refsig"] = {{"bandwidth_subcarriers", cfg.refsig.bandwidth_subcarriers},
                   {"num_symbols", cfg.refsig.num_symbols},
                   {"bursts_per_trial", cfg.refsig.bursts_per_trial},
                   {"sequence_seed", cfg.refsig.sequence_seed}};
  doc["estimator"] = {{"lag", cfg.estimator.lag},
                      {"iir_gamma", cfg.estimator.iir_gamma},
                      {"drift_aware", cfg.estimator.drift_aware},
                      {"alpha", resolved_estimator(cfg).alpha},
                      {"combining", cfg.combining == BurstCombining::kMetricSum ? "metric" : "iir"}};
  if (cfg.position_offsets_hz) {
    doc["positions"] = {{"offsets_hz", *cfg.position_offsets_hz}};
  } else {
    doc["separation_hz"] = cfg.separation_hz;
  }
  nlohmann::json snrs = nlohmann::json::array();
  for (double v : cfg.snr_db) {
    if (std::isinf(v)) {
      snrs.push_back("inf");
    } else {
      snrs.push_back(v);
    }
  }
  doc["snr_db"] = snrs;
  doc["trials"] = cfg.trials;
  doc["seed"] = cfg.seed;
  doc["threads"] = cfg.threads;
  doc["quantiles"] = cfg.quantiles;
  doc["mode"] = cfg.mode == SimulationMode::kNarrowband ? "narrowband" : "wideband";
  doc["output_path"] = cfg.output_path;
  doc["verbose"] = cfg.verbose;
  return doc;
}

}  // namespace ntn
