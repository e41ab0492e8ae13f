#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "uvac/model.hpp"

namespace uvac::checkpoint {

inline constexpr std::int64_t kFormatVersion = 1;

struct CheckpointMeta {
  std::int64_t format_version = kFormatVersion;
  std::int64_t epoch = 0;            // epochs completed
  std::uint32_t dsp_hash = 0;
  std::uint32_t manifest_hash = 0;
  std::string model_config_json;
  std::string train_config_json;
  double best_validation_loss = 0.0;
  std::uint64_t seed = 0;
};

/// Writes weights, prior, optional optimizer state and metadata; atomic via rename.
void save(const std::filesystem::path& path, model::UvacModel& model, torch::optim::Optimizer* optimizer,
          const CheckpointMeta& meta);

struct Loaded {
  model::UvacModel model{nullptr};
  CheckpointMeta meta;
};

/// Rebuilds the model from the stored config and loads its weights.
Loaded load(const std::filesystem::path& path);

/// Restores optimizer state into an optimizer built over the loaded model's parameters.
void load_optimizer(const std::filesystem::path& path, torch::optim::Optimizer& optimizer);

CheckpointMeta read_meta(const std::filesystem::path& path);

}  // namespace uvac::checkpoint
