#include "uvac/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace uvac::config {

void RunConfig::validate() const {
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (out_dir.empty()) throw std::invalid_argument("config: out_dir is empty");
  if (dsp.window == 0 || dsp.hop == 0 || dsp.sample_rate <= 0 || dsp.bins == 0)
    throw std::invalid_argument("config: dsp window, hop, sample_rate and bins must be positive");
  if (dsp.target_samples < dsp.window) throw std::invalid_argument("config: dsp target_samples shorter than a window");
  if (dsp.first_bin + dsp.bins > dsp.one_sided_bins())
    throw std::invalid_argument("config: dsp bins exceed the window's " + std::to_string(dsp.one_sided_bins()) +
                                " one-sided bins");
  train.validate();
  if (train.model.freq_bins != std::int64_t(dsp.bins) || train.model.time_frames != std::int64_t(dsp.frames()))
    throw std::invalid_argument("config: model input " + std::to_string(train.model.freq_bins) + "x" +
                                std::to_string(train.model.time_frames) + " does not match the spectrogram grid " +
                                std::to_string(dsp.bins) + "x" + std::to_string(dsp.frames()));
}

namespace {

nlohmann::json dsp_json(const dsp::DspConfig& d) {
  return {{"sample_rate", d.sample_rate}, {"target_samples", d.target_samples}, {"window", d.window},
          {"hop", d.hop},                 {"first_bin", d.first_bin},           {"bins", d.bins}};
}

// Rejects keys absent from the serialized form of the defaults.
void reject_unknown(const nlohmann::json& j, const nlohmann::json& reference, const std::string& section) {
  if (!j.is_object()) throw std::invalid_argument("config: " + section + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!reference.contains(key)) throw std::invalid_argument("config: unknown " + section + " key '" + key + "'");
}

dsp::DspConfig dsp_from_json(const nlohmann::json& j) {
  reject_unknown(j, dsp_json(dsp::DspConfig{}), "dsp");
  dsp::DspConfig d;
  d.sample_rate = j.value("sample_rate", d.sample_rate);
  d.target_samples = j.value("target_samples", d.target_samples);
  d.window = j.value("window", d.window);
  d.hop = j.value("hop", d.hop);
  d.first_bin = j.value("first_bin", d.first_bin);
  d.bins = j.value("bins", d.bins);
  return d;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return {{"corpus_dir", corpus_dir.string()},
          {"out_dir", out_dir.string()},
          {"seed", seed},
          {"split_mode", dataio::to_string(split_mode)},
          {"runs", runs},
          {"dsp", dsp_json(dsp)},
          {"train", train.to_json()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  static const std::set<std::string> known{"corpus_dir", "out_dir", "seed", "split_mode", "runs", "dsp", "train"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  RunConfig c;
  if (j.contains("corpus_dir")) c.corpus_dir = j.at("corpus_dir").get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  c.seed = j.value("seed", c.seed);
  if (j.contains("split_mode")) c.split_mode = dataio::split_mode_from_string(j.at("split_mode").get<std::string>());
  c.runs = j.value("runs", c.runs);
  if (j.contains("dsp")) c.dsp = dsp_from_json(j.at("dsp"));
  if (j.contains("train")) {
    const auto& t = j.at("train");
    const auto reference = trainer::TrainConfig{}.to_json();
    reject_unknown(t, reference, "train");
    if (t.contains("model")) reject_unknown(t.at("model"), reference.at("model"), "model");
    c.train = trainer::TrainConfig::from_json(t);
  }
  c.train.seed = j.contains("train") && j.at("train").contains("seed") ? c.train.seed : c.seed;
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace uvac::config
