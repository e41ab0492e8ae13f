#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvac/cache.hpp"
#include "uvac/dataio.hpp"
#include "uvac/loss.hpp"
#include "uvac/metrics.hpp"
#include "uvac/model.hpp"

namespace uvac::trainer {

struct TrainConfig {
  int epochs = 500;
  int batch_size = 64;
  double lr_start = 0.005;
  double lr_end = 0.0005;
  int mc_samples = 1;
  std::uint64_t seed = 0;
  double kl_weight = 1.0;
  loss::ReconFamily recon = loss::ReconFamily::Bernoulli;
  double max_grad_norm = 0.0;    // 0 disables clipping
  std::size_t train_limit = 0;   // 0 uses the whole training split
  bool resume = false;           // continue from latest.pt in the output directory
  model::ModelConfig model;      // latent_dim / components live here

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// lr(e) = lr_start * (lr_end / lr_start)^(e / (epochs - 1)); constant lr_start when epochs == 1.
double lr_schedule(int epoch, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  loss::LossBreakdown train;
  loss::LossBreakdown validation;
  double val_accuracy = 0.0;
  double val_nmi = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path latest_checkpoint;
  std::vector<EpochRecord> history;
};

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Trains on manifest.train_ids, validates on manifest.val_ids. Writes latest.pt, best.pt and
/// epochs.jsonl under out_dir. Never touches manifest.test_ids.
TrainResult train(const TrainConfig& config, const dsp::SpectrogramDataset& dataset,
                  const dataio::SplitManifest& manifest, const std::filesystem::path& out_dir,
                  const EpochCallback& on_epoch = {});

/// Seeded subset of the training ids used when train_limit > 0.
std::vector<std::string> training_ids(const TrainConfig& config, const dataio::SplitManifest& manifest);

/// Stacks grids into [B, 1, F, T] and masks into [B, T].
std::pair<torch::Tensor, torch::Tensor> make_batch(const std::vector<const dsp::SpectrogramSample*>& samples,
                                                   torch::ScalarType dtype = torch::kFloat);

struct EncodedSplit {
  RowMatrix means;  // n x d_z posterior means
  Labels predicted;
  Labels truth;
};

/// Evaluation-mode encoding; clusters come from the prior responsibilities at z = mu.
EncodedSplit encode_split(model::UvacModel& model, const std::vector<const dsp::SpectrogramSample*>& samples,
                          int batch_size = 256);

/// Refuses checkpoints whose preprocessing hash differs from the dataset's.
metrics::MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                           const dsp::SpectrogramDataset& dataset,
                                           const std::vector<std::string>& ids);

}  // namespace uvac::trainer
