#include "uvac/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include "uvac/baselines.hpp"
#include "uvac/cache.hpp"
#include "uvac/checkpoint.hpp"
#include "uvac/trainer.hpp"

namespace uvac::cli {
namespace fs = std::filesystem;
namespace {

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

fs::path under_out(const config::RunConfig& config, const fs::path& requested, const std::string& fallback) {
  if (requested.empty()) return config.out_dir / fallback;
  return requested.is_absolute() ? requested : config.out_dir / requested;
}

std::string provenance(const config::RunConfig& config, const std::string& what) {
  return "# " + what + "\n# seed " + std::to_string(config.seed) + "\n";
}

dataio::SplitManifest load_manifest(const config::RunConfig& config) {
  if (!fs::exists(config.manifest_path()))
    throw std::runtime_error("no split manifest at " + config.manifest_path().string() + "; run prepare first");
  return dataio::read_manifest(config.manifest_path());
}

dsp::SpectrogramDataset load_dataset(const config::RunConfig& config) {
  if (!fs::exists(config.cache_path()))
    throw std::runtime_error("no spectrogram cache at " + config.cache_path().string() + "; run prepare first");
  auto ds = dsp::SpectrogramDataset::load(config.cache_path());
  if (ds.dsp_hash() != config.dsp.hash())
    throw std::runtime_error("spectrogram cache was built with different preprocessing settings; rerun prepare");
  return ds;
}

// Reads whatever is usable from a cache file into `keep`. Returns true if the file is complete,
// clean and holds exactly the wanted ids.
bool salvage(const fs::path& path, const config::RunConfig& config, const std::map<std::string, std::size_t>& wanted,
             std::map<std::string, dsp::SpectrogramSample>& keep, std::ostream& log) {
  if (!fs::exists(path)) return false;
  dsp::CacheRead read;
  try {
    read = dsp::read_cache(path);
  } catch (const std::exception& e) {
    log << "prepare: ignoring unreadable cache " << path.string() << " (" << e.what() << ")\n";
    return false;
  }
  if (read.header.dsp_hash != config.dsp.hash() || read.header.freq_bins != config.dsp.bins ||
      read.header.frames != config.dsp.frames()) {
    log << "prepare: " << path.string() << " was built with different preprocessing; rebuilding\n";
    return false;
  }
  if (read.corrupted > 0)
    log << "prepare: " << read.corrupted << " corrupted record(s) in " << path.string() << " will be regenerated\n";
  std::size_t stale = 0;
  const std::size_t kept_before = keep.size();
  for (auto& s : read.samples) {
    if (!wanted.count(s.clip_id)) {
      ++stale;
      continue;
    }
    keep.emplace(s.clip_id, std::move(s));
  }
  if (read.truncated) log << "prepare: resuming from " << keep.size() - kept_before << " record(s) in " << path.string() << "\n";
  return !read.truncated && read.corrupted == 0 && stale == 0 && read.samples.size() == read.header.count;
}

}  // namespace

const std::vector<std::string>& split_ids(const dataio::SplitManifest& manifest, const std::string& split) {
  if (split == "train") return manifest.train_ids;
  if (split == "val") return manifest.val_ids;
  if (split == "test") return manifest.test_ids;
  throw std::invalid_argument("unknown split '" + split + "' (expected train, val or test)");
}

PrepareSummary prepare(const config::RunConfig& config, const PrepareOptions& options, std::ostream& log) {
  config.validate();
  if (options.jobs < 1) throw std::invalid_argument("prepare: jobs must be >= 1");
  fs::create_directories(config.out_dir);

  PrepareSummary summary;
  auto listing = dataio::list_corpus(config.corpus_dir);
  summary.warnings = listing.warnings;
  summary.listed = listing.entries.size();
  if (listing.entries.empty()) throw std::runtime_error("no <digit>_<speaker>_<index>.wav files under " + config.corpus_dir.string());
  std::map<std::string, std::size_t> wanted;
  for (std::size_t i = 0; i < listing.entries.size(); ++i) wanted.emplace(listing.entries[i].id, i);

  const fs::path cache = config.cache_path();
  const fs::path partial = cache.string() + ".partial";
  std::map<std::string, dsp::SpectrogramSample> kept;
  bool clean = salvage(cache, config, wanted, kept, log);
  if (fs::exists(partial)) {
    salvage(partial, config, wanted, kept, log);
    clean = false;
  }

  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < listing.entries.size(); ++i)
    if (!kept.count(listing.entries[i].id)) missing.push_back(i);

  std::vector<std::pair<std::string, std::string>> cached_ids;
  for (const auto& [id, s] : kept) cached_ids.emplace_back(id, s.speaker_id);
  summary.reused = kept.size();

  if (!(clean && missing.empty())) {
    std::optional<dsp::CacheWriter> writer;
    const auto open_writer = [&] {
      if (!writer) writer.emplace(cache, std::uint32_t(config.dsp.bins), std::uint32_t(config.dsp.frames()), config.dsp.hash());
    };
    if (!clean) open_writer();
    if (writer) {
      for (auto& [id, s] : kept) writer->append(s);
    }
    kept.clear();

    // Workers preprocess a chunk in parallel; records are appended in listing order.
    const std::size_t chunk = std::size_t(options.jobs) * 16;
    for (std::size_t start = 0; start < missing.size(); start += chunk) {
      const std::size_t end = std::min(missing.size(), start + chunk);
      std::vector<std::optional<dsp::SpectrogramSample>> done(end - start);
      std::vector<std::string> errors(end - start);
      std::atomic<std::size_t> next{start};
      const auto work = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < end;) {
          const auto& entry = listing.entries[missing[k]];
          try {
            done[k - start] = dsp::preprocess(dataio::load_clip(entry), config.dsp);
          } catch (const std::exception& e) {
            errors[k - start] = entry.path.string() + ": " + e.what() + ", skipped";
          }
        }
      };
      std::vector<std::thread> pool;
      for (int t = 1; t < options.jobs; ++t) pool.emplace_back(work);
      work();
      for (auto& t : pool) t.join();
      for (std::size_t k = 0; k < done.size(); ++k) {
        if (!done[k]) {
          summary.warnings.push_back(errors[k]);
          ++summary.failed;
          continue;
        }
        open_writer();
        writer->append(*done[k]);
        cached_ids.emplace_back(done[k]->clip_id, done[k]->speaker_id);
        ++summary.processed;
      }
      log << "prepare: " << end << "/" << missing.size() << " new clips processed\r" << std::flush;
    }
    if (!missing.empty()) log << "\n";
    if (writer) {
      if (writer->written() == 0) throw std::runtime_error("no decodable clips under " + config.corpus_dir.string());
      writer->commit();
      summary.cache_rewritten = true;
    }
  }
  if (cached_ids.empty()) throw std::runtime_error("no decodable clips under " + config.corpus_dir.string());

  const auto manifest = dataio::make_splits(cached_ids, config.seed, config.split_mode);
  bool same = false;
  if (fs::exists(config.manifest_path())) {
    try {
      same = dataio::read_manifest(config.manifest_path()).content_hash() == manifest.content_hash();
    } catch (const std::exception&) {
      same = false;
    }
  }
  if (!same) {
    dataio::write_manifest(manifest, config.manifest_path());
    summary.manifest_written = true;
  }
  write_text_atomic(config.out_dir / "prepare_config.json", config.to_json().dump(2) + "\n");

  summary.train = manifest.train_ids.size();
  summary.val = manifest.val_ids.size();
  summary.test = manifest.test_ids.size();
  summary.freq_bins = config.dsp.bins;
  summary.frames = config.dsp.frames();
  return summary;
}

TrainSummary train(const config::RunConfig& config, std::ostream& log) {
  config.validate();
  const auto manifest = load_manifest(config);
  const auto dataset = load_dataset(config);

  TrainSummary summary;
  for (int run = 0; run < config.runs; ++run) {
    trainer::TrainConfig tc = config.train;
    tc.seed = config.train.seed + std::uint64_t(run);
    const fs::path dir = config.run_dir(run);
    fs::create_directories(dir);
    auto run_config = config;
    run_config.train = tc;
    write_text_atomic(dir / "config.json", run_config.to_json().dump(2) + "\n");

    log << "train: run " << run + 1 << "/" << config.runs << " (seed " << tc.seed << ") -> " << dir.string() << "\n";
    const auto result = trainer::train(tc, dataset, manifest, dir, [&](const trainer::EpochRecord& e) {
      char line[200];
      std::snprintf(line, sizeof line, "epoch %4d  lr %.6f  train %.3f (rec %.3f kl %.3f)  val %.3f  acc %.2f  nmi %.3f  %.1fs\n",
                    e.epoch + 1, e.learning_rate, e.train.total, e.train.reconstruction, e.train.kl, e.validation.total,
                    e.val_accuracy, e.val_nmi, e.seconds);
      log << line << std::flush;
      return true;
    });
    auto report = trainer::evaluate_checkpoint(result.best_checkpoint, dataset, manifest.test_ids);
    write_text_atomic(dir / "metrics_test.txt",
                      provenance(run_config, "uvac test metrics for " + result.best_checkpoint.string()) +
                          "# train seed " + std::to_string(tc.seed) + "\n" + report.to_text());
    summary.best_checkpoints.push_back(result.best_checkpoint);
    summary.reports.push_back(std::move(report));
  }
  summary.mean = metrics::mean(summary.reports);
  write_text_atomic(config.out_dir / "metrics_mean.txt",
                    provenance(config, "uvac test metrics averaged over " + std::to_string(config.runs) + " run(s)") +
                        summary.mean.to_text());
  return summary;
}

metrics::MetricsReport eval(const config::RunConfig& config, const EvalOptions& options, std::ostream& log) {
  config.validate();
  if (!options.use_labels) {
    if (options.checkpoint.empty()) throw std::invalid_argument("eval: --checkpoint is required unless --use-labels");
    if (!fs::exists(options.checkpoint)) throw std::runtime_error("checkpoint not found: " + options.checkpoint.string());
  }
  const auto manifest = load_manifest(config);
  const auto dataset = load_dataset(config);
  const auto& ids = split_ids(manifest, options.split);
  if (ids.empty()) throw std::runtime_error("split '" + options.split + "' is empty");

  metrics::MetricsReport report;
  std::string what;
  if (options.use_labels) {
    const auto samples = dataset.select(ids);
    const RowMatrix features = dsp::flatten(samples);
    Labels truth;
    for (const auto* s : samples) truth.push_back(s->digit);
    log << "eval: labels as clusters on " << features.rows() << " flattened spectrograms\n";
    report = metrics::evaluate(features, truth, truth);
    what = "uvac labels-as-clusters metrics, " + options.split + " split";
  } else {
    report = trainer::evaluate_checkpoint(options.checkpoint, dataset, ids);
    what = "uvac metrics for " + options.checkpoint.string() + ", " + options.split + " split";
  }
  const auto path = under_out(config, options.report,
                              (options.use_labels ? "labels_" : "eval_") + options.split + ".txt");
  write_text_atomic(path, provenance(config, what) + report.to_text());
  log << "eval: report written to " << path.string() << "\n";
  return report;
}

metrics::MetricsReport baseline(const config::RunConfig& config, const BaselineOptions& options, std::ostream& log) {
  config.validate();
  if (options.method != "kmeans" && options.method != "gmm-em")
    throw std::invalid_argument("unknown baseline method '" + options.method + "' (expected kmeans or gmm-em)");
  if (options.runs < 1 || options.restarts < 1) throw std::invalid_argument("baseline: runs and restarts must be >= 1");
  const auto manifest = load_manifest(config);
  const auto dataset = load_dataset(config);
  const auto samples = dataset.select(split_ids(manifest, options.split));
  const RowMatrix features = dsp::flatten(samples);
  Labels truth;
  for (const auto* s : samples) truth.push_back(s->digit);
  const int k = int(config.train.model.components);

  std::vector<metrics::MetricsReport> reports;
  std::string per_run;
  for (int run = 0; run < options.runs; ++run) {
    const std::uint64_t seed = config.seed + std::uint64_t(run);
    Labels pred;
    if (options.method == "kmeans") {
      pred = baselines::kmeans_fit(features, k, {.restarts = options.restarts, .seed = seed}).assignments;
    } else {
      pred = baselines::gmm_em_fit(features, k, {.seed = seed}).assignments;
    }
    reports.push_back(metrics::evaluate(features, pred, truth));
    const auto& r = reports.back();
    char line[160];
    std::snprintf(line, sizeof line, "# run %d seed %llu: accuracy_pct %.4f nmi %.4f silhouette %.4f dbi %.4f\n", run,
                  static_cast<unsigned long long>(seed), r.accuracy_pct, r.nmi, r.silhouette, r.dbi);
    per_run += line;
    log << options.method << ": " << (line + 2);
  }
  const auto report = metrics::mean(reports);
  const auto path = under_out(config, options.report, "baseline_" + options.method + "_" + options.split + ".txt");
  write_text_atomic(path, provenance(config, "uvac " + options.method + " baseline, " + options.split + " split, " +
                                                 std::to_string(options.runs) + " run(s)") +
                              per_run + report.to_text());
  log << options.method << ": report written to " << path.string() << "\n";
  return report;
}

PlotSummary plot(const config::RunConfig& config, const PlotOptions& options, std::ostream& log) {
  config.validate();
  if (options.source != "latent" && options.source != "spectrogram")
    throw std::invalid_argument("plot: unknown source '" + options.source + "' (expected latent or spectrogram)");
  if (options.labels != "predicted" && options.labels != "truth")
    throw std::invalid_argument("plot: unknown labels '" + options.labels + "' (expected predicted or truth)");
  if (options.source == "spectrogram" && options.labels == "predicted")
    throw std::invalid_argument("plot: spectrogram features have no predicted clusters; use --labels truth");
  if (options.source == "latent" && !fs::exists(options.checkpoint))
    throw std::runtime_error("checkpoint not found: " + options.checkpoint.string());

  const auto manifest = load_manifest(config);
  const auto dataset = load_dataset(config);
  std::vector<std::string> ids = split_ids(manifest, options.split);
  if (options.max_points > 0 && ids.size() > options.max_points) {
    std::mt19937_64 rng(config.seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(options.max_points);
    std::sort(ids.begin(), ids.end());
  }
  const auto samples = dataset.select(ids);

  RowMatrix features;
  Labels labels;
  if (options.source == "latent") {
    auto loaded = checkpoint::load(options.checkpoint);
    if (loaded.meta.dsp_hash != dataset.dsp_hash())
      throw std::runtime_error("checkpoint was trained with different preprocessing");
    auto encoded = trainer::encode_split(loaded.model, samples);
    features = std::move(encoded.means);
    labels = options.labels == "predicted" ? encoded.predicted : encoded.truth;
  } else {
    features = dsp::flatten(samples);
    for (const auto* s : samples) labels.push_back(s->digit);
  }

  auto tsne_options = options.tsne;
  tsne_options.seed = config.seed;
  log << "plot: embedding " << features.rows() << " points of dimension " << features.cols() << "\n";
  const auto embedding = viz::tsne(features, tsne_options);

  PlotSummary summary;
  summary.warnings = embedding.warnings;
  summary.image = under_out(config, options.image, "tsne_" + options.source + "_" + options.split + ".svg");
  summary.coordinates = fs::path(summary.image).replace_extension(".coords.txt");
  if (summary.image.has_parent_path()) fs::create_directories(summary.image.parent_path());
  const std::string title = (options.source == "latent" ? "UVAC latent means" : "Flattened spectrograms") +
                            std::string(", ") + options.labels + " labels (seed " + std::to_string(config.seed) + ")";
  const fs::path image_tmp = summary.image.string() + ".tmp";
  const fs::path coords_tmp = summary.coordinates.string() + ".tmp";
  viz::write_scatter_svg(image_tmp.string(), embedding.coords, labels, title);
  viz::write_coordinates(coords_tmp.string(), embedding.coords, labels);
  fs::rename(coords_tmp, summary.coordinates);
  fs::rename(image_tmp, summary.image);
  return summary;
}

}  // namespace uvac::cli
