#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "uvac/config.hpp"
#include "uvac/metrics.hpp"
#include "uvac/tsne.hpp"

namespace uvac::cli {

struct PrepareOptions {
  int jobs = 1;
};

struct PrepareSummary {
  std::size_t listed = 0;     // parseable corpus files
  std::size_t reused = 0;     // records kept from an earlier cache
  std::size_t processed = 0;  // records computed in this run
  std::size_t failed = 0;     // files that did not decode
  bool cache_rewritten = false;
  bool manifest_written = false;
  std::size_t train = 0, val = 0, test = 0;
  std::size_t freq_bins = 0, frames = 0;
  std::vector<std::string> warnings;
};

/// Preprocesses the corpus into the cache and writes the split manifest. Reuses valid records
/// from an existing or interrupted cache and regenerates corrupted ones; a rerun with nothing
/// to do leaves both files untouched.
PrepareSummary prepare(const config::RunConfig& config, const PrepareOptions& options, std::ostream& log);

struct TrainSummary {
  std::vector<std::filesystem::path> best_checkpoints;
  std::vector<metrics::MetricsReport> reports;  // test split, one per run
  metrics::MetricsReport mean;
};

/// Trains config.runs models with seeds seed .. seed + runs - 1, evaluating each best checkpoint
/// on the test split.
TrainSummary train(const config::RunConfig& config, std::ostream& log);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::string split = "test";
  bool use_labels = false;  // truth labels as clusters on flattened spectrograms
  std::filesystem::path report;  // relative paths resolve under out_dir
};

metrics::MetricsReport eval(const config::RunConfig& config, const EvalOptions& options, std::ostream& log);

struct BaselineOptions {
  std::string method;  // "kmeans" or "gmm-em"
  std::string split = "test";
  int runs = 1;
  int restarts = 10;
  std::filesystem::path report;
};

metrics::MetricsReport baseline(const config::RunConfig& config, const BaselineOptions& options, std::ostream& log);

struct PlotOptions {
  std::string source = "latent";  // "latent" (needs a checkpoint) or "spectrogram"
  std::filesystem::path checkpoint;
  std::string labels = "predicted";  // "predicted" or "truth"
  std::string split = "test";
  std::filesystem::path image;
  std::size_t max_points = 0;  // 0 keeps every sample
  viz::TsneOptions tsne;
};

struct PlotSummary {
  std::filesystem::path image;
  std::filesystem::path coordinates;
  std::vector<std::string> warnings;
};

PlotSummary plot(const config::RunConfig& config, const PlotOptions& options, std::ostream& log);

/// Ids of a named split ("train", "val" or "test").
const std::vector<std::string>& split_ids(const dataio::SplitManifest& manifest, const std::string& split);

}  // namespace uvac::cli
