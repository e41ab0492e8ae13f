#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "uvac/dataio.hpp"
#include "uvac/dsp.hpp"
#include "uvac/trainer.hpp"

namespace uvac::config {

/// Everything a CLI invocation needs besides its subcommand flags.
struct RunConfig {
  std::filesystem::path corpus_dir = "data/AudioMNIST";
  std::filesystem::path out_dir = "runs";
  std::uint64_t seed = 0;
  dataio::SplitMode split_mode = dataio::SplitMode::Uniform;
  int runs = 1;
  dsp::DspConfig dsp;
  trainer::TrainConfig train;

  std::filesystem::path cache_path() const { return out_dir / "spectrograms.bin"; }
  std::filesystem::path manifest_path() const { return out_dir / "splits.txt"; }
  std::filesystem::path run_dir(int run) const { return out_dir / ("run" + std::to_string(run)); }

  /// Also checks that the model input matches the preprocessing output shape.
  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected so typos do not silently fall back to defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace uvac::config
