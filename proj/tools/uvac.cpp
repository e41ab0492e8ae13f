// uvac: prepare, train, eval, baseline and plot for unsupervised spoken-digit clustering.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "uvac/commands.hpp"

namespace {

using uvac::config::RunConfig;

template <typename T>
void override_with(const std::optional<T>& value, T& target) {
  if (value) target = *value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised clustering of spoken digits with a Gaussian-mixture VAE"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for splits, initialization, sampling and embeddings");
  app.add_option("--out", out, "Output directory (cache, manifest, runs, reports)");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Preprocess the corpus into a cache and write the split manifest");
  std::optional<std::string> corpus, split_mode;
  uvac::cli::PrepareOptions prepare_options;
  prepare->add_option("--corpus", corpus, "Corpus root containing <digit>_<speaker>_<index>.wav files");
  prepare->add_option("--split-mode", split_mode, "uniform or speaker")->check(CLI::IsMember({"uniform", "speaker"}));
  prepare->add_option("--jobs", prepare_options.jobs, "Preprocessing worker threads")->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "Train, then evaluate the best checkpoint on the test split");
  std::optional<int> epochs, batch_size, mc_samples, runs;
  std::optional<double> lr_start, lr_end, kl_weight, max_grad_norm;
  std::optional<std::size_t> train_limit;
  std::optional<std::int64_t> latent_dim, components;
  std::optional<std::string> recon;
  bool resume = false;
  train->add_option("--epochs", epochs, "Training epochs (default 500)");
  train->add_option("--batch-size", batch_size, "Minibatch size (default 64)");
  train->add_option("--lr-start", lr_start, "Learning rate at the first epoch (default 0.005)");
  train->add_option("--lr-end", lr_end, "Learning rate at the last epoch, reached geometrically (default 0.0005)");
  train->add_option("--mc-samples", mc_samples, "Monte Carlo draws per sample for the reconstruction term");
  train->add_option("--kl-weight", kl_weight, "Weight of the KL term (default 1)");
  train->add_option("--recon", recon, "bernoulli or gaussian")->check(CLI::IsMember({"bernoulli", "gaussian"}));
  train->add_option("--max-grad-norm", max_grad_norm, "Gradient clipping threshold; 0 disables");
  train->add_option("--train-limit", train_limit, "Train on a seeded subset of this many samples");
  train->add_option("--latent-dim", latent_dim, "Latent dimension (default 10)");
  train->add_option("--components", components, "Mixture components, i.e. clusters (default 10)");
  train->add_option("--runs", runs, "Independent runs with seeds seed .. seed + runs - 1");
  train->add_flag("--resume", resume, "Continue each run from its latest.pt");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (or the labels themselves) on a split");
  uvac::cli::EvalOptions eval_options;
  std::string eval_report;
  eval->add_option("--checkpoint", eval_options.checkpoint);
  eval->add_option("--split", eval_options.split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_flag("--use-labels", eval_options.use_labels, "Score the true labels as clusters of the raw spectrograms");
  eval->add_option("--report", eval_report, "Report file (relative paths go under --out)");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "K-means or GMM-EM on flattened spectrograms");
  uvac::cli::BaselineOptions baseline_options;
  std::string baseline_report;
  baseline->add_option("method", baseline_options.method, "kmeans or gmm-em")
      ->required()
      ->check(CLI::IsMember({"kmeans", "gmm-em"}));
  baseline->add_option("--split", baseline_options.split)->check(CLI::IsMember({"train", "val", "test"}));
  baseline->add_option("--runs", baseline_options.runs, "Seeds seed .. seed + runs - 1, metrics averaged")
      ->check(CLI::PositiveNumber);
  baseline->add_option("--restarts", baseline_options.restarts, "k-means restarts per run")->check(CLI::PositiveNumber);
  baseline->add_option("--report", baseline_report);

  // plot
  auto* plot = app.add_subcommand("plot", "Two-dimensional t-SNE scatter of latent means or spectrograms");
  uvac::cli::PlotOptions plot_options;
  std::string plot_image;
  plot->add_option("--source", plot_options.source)->check(CLI::IsMember({"latent", "spectrogram"}));
  plot->add_option("--checkpoint", plot_options.checkpoint);
  plot->add_option("--labels", plot_options.labels)->check(CLI::IsMember({"predicted", "truth"}));
  plot->add_option("--split", plot_options.split)->check(CLI::IsMember({"train", "val", "test"}));
  plot->add_option("--image", plot_image, "SVG output (coordinates go next to it)");
  plot->add_option("--max-points", plot_options.max_points, "Seeded subsample size; 0 keeps all");
  plot->add_option("--perplexity", plot_options.tsne.perplexity);
  plot->add_option("--iterations", plot_options.tsne.iterations);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (seed) {
      config.seed = *seed;
      config.train.seed = *seed;
    }
    if (out) config.out_dir = *out;
    if (corpus) config.corpus_dir = *corpus;
    if (split_mode) config.split_mode = uvac::dataio::split_mode_from_string(*split_mode);
    override_with(epochs, config.train.epochs);
    override_with(batch_size, config.train.batch_size);
    override_with(mc_samples, config.train.mc_samples);
    override_with(lr_start, config.train.lr_start);
    override_with(lr_end, config.train.lr_end);
    override_with(kl_weight, config.train.kl_weight);
    override_with(max_grad_norm, config.train.max_grad_norm);
    override_with(train_limit, config.train.train_limit);
    override_with(latent_dim, config.train.model.latent_dim);
    override_with(components, config.train.model.components);
    override_with(runs, config.runs);
    if (recon) config.train.recon = *recon == "gaussian" ? uvac::loss::ReconFamily::Gaussian : uvac::loss::ReconFamily::Bernoulli;
    if (resume) config.train.resume = true;
    config.validate();

    if (command == "prepare") {
      const auto s = uvac::cli::prepare(config, prepare_options, std::cerr);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "clips listed " << s.listed << ", reused " << s.reused << ", processed " << s.processed
                << ", failed " << s.failed << "\n"
                << "cache " << (s.cache_rewritten ? "written" : "up to date") << ": " << config.cache_path().string()
                << "\n"
                << "manifest " << (s.manifest_written ? "written" : "up to date") << ": "
                << config.manifest_path().string() << "\n"
                << "splits train " << s.train << ", val " << s.val << ", test " << s.test << "\n"
                << "grid " << s.freq_bins << " x " << s.frames << "\n";
    } else if (command == "train") {
      const auto s = uvac::cli::train(config, std::cerr);
      std::cout << s.mean.to_text();
    } else if (command == "eval") {
      eval_options.report = eval_report;
      std::cout << uvac::cli::eval(config, eval_options, std::cerr).to_text();
    } else if (command == "baseline") {
      baseline_options.report = baseline_report;
      std::cout << uvac::cli::baseline(config, baseline_options, std::cerr).to_text();
    } else if (command == "plot") {
      plot_options.image = plot_image;
      const auto s = uvac::cli::plot(config, plot_options, std::cerr);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "image " << s.image.string() << "\ncoordinates " << s.coordinates.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "uvac " << command << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
