#include "uvac/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "uvac/checkpoint.hpp"

namespace uvac::trainer {
namespace fs = std::filesystem;
namespace {

std::string recon_name(loss::ReconFamily f) { return f == loss::ReconFamily::Bernoulli ? "bernoulli" : "gaussian"; }

loss::ReconFamily recon_from_name(const std::string& s) {
  if (s == "bernoulli") return loss::ReconFamily::Bernoulli;
  if (s == "gaussian" || s == "mse") return loss::ReconFamily::Gaussian;
  throw std::invalid_argument("unknown reconstruction family '" + s + "' (expected bernoulli or gaussian)");
}

nlohmann::json breakdown_json(const loss::LossBreakdown& b) {
  return {{"reconstruction", b.reconstruction}, {"kl", b.kl}, {"total", b.total}};
}

// Running batch-size-weighted mean of loss breakdowns.
struct LossAccumulator {
  double recon = 0, kl = 0, total = 0;
  double count = 0;
  void add(const loss::LossBreakdown& b, double n) {
    recon += b.reconstruction * n;
    kl += b.kl * n;
    total += b.total * n;
    count += n;
  }
  loss::LossBreakdown mean() const {
    if (count == 0) return {};
    return {recon / count, kl / count, total / count};
  }
};

void check_shapes(const std::vector<const dsp::SpectrogramSample*>& samples, const model::ModelConfig& config) {
  for (const auto* s : samples)
    if (std::int64_t(s->freq_bins) != config.freq_bins || std::int64_t(s->frames) != config.time_frames)
      throw std::invalid_argument("sample " + s->clip_id + " is " + std::to_string(s->freq_bins) + "x" +
                                  std::to_string(s->frames) + " but the model expects " +
                                  std::to_string(config.freq_bins) + "x" + std::to_string(config.time_frames));
}

void set_learning_rate(torch::optim::Adam& optimizer, double lr) {
  for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

// Per-epoch streams so a resumed run replays the same shuffles and draws.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(epoch), std::uint32_t(stream)};
  std::uint64_t out[1];
  std::uint32_t parts[2];
  seq.generate(parts, parts + 2);
  out[0] = (std::uint64_t(parts[0]) << 32) | parts[1];
  return out[0];
}

loss::LossBreakdown validation_loss(model::UvacModel& model, const std::vector<const dsp::SpectrogramSample*>& val,
                                    const TrainConfig& config) {
  torch::NoGradGuard no_grad;
  auto generator = at::detail::createCPUGenerator(epoch_seed(config.seed, -1, 2));
  const loss::LossOptions options{config.recon, config.kl_weight};
  LossAccumulator acc;
  for (std::size_t start = 0; start < val.size(); start += std::size_t(config.batch_size)) {
    const std::size_t end = std::min(val.size(), start + std::size_t(config.batch_size));
    const std::vector<const dsp::SpectrogramSample*> batch(val.begin() + std::ptrdiff_t(start),
                                                           val.begin() + std::ptrdiff_t(end));
    const auto [x, mask] = make_batch(batch);
    acc.add(loss::elbo_loss(model, x, mask, config.mc_samples, generator, options).values(), double(batch.size()));
  }
  return acc.mean();
}

nlohmann::json comparable(const TrainConfig& c) {
  auto j = c.to_json();
  j.erase("resume");
  j.erase("epochs");
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(lr_end > 0.0)) throw std::invalid_argument("train config: lr_end must be > 0");
  if (!(lr_start >= lr_end))
    throw std::invalid_argument("train config: lr_start (" + std::to_string(lr_start) + ") must be >= lr_end (" +
                                std::to_string(lr_end) + ")");
  if (mc_samples < 1) throw std::invalid_argument("train config: mc_samples must be >= 1");
  if (!(kl_weight >= 0.0)) throw std::invalid_argument("train config: kl_weight must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("train config: max_grad_norm must be >= 0");
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr_start", lr_start},
          {"lr_end", lr_end},
          {"mc_samples", mc_samples},
          {"seed", seed},
          {"kl_weight", kl_weight},
          {"recon", recon_name(recon)},
          {"max_grad_norm", max_grad_norm},
          {"train_limit", train_limit},
          {"resume", resume},
          {"model", nlohmann::json::parse(model.to_json())}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_start = j.value("lr_start", c.lr_start);
  c.lr_end = j.value("lr_end", c.lr_end);
  c.mc_samples = j.value("mc_samples", c.mc_samples);
  c.seed = j.value("seed", c.seed);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  if (j.contains("recon")) c.recon = recon_from_name(j.at("recon").get<std::string>());
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.train_limit = j.value("train_limit", c.train_limit);
  c.resume = j.value("resume", c.resume);
  if (j.contains("model")) c.model = model::ModelConfig::from_json(j.at("model").dump());
  return c;
}

double lr_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.epochs)
    throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(config.epochs) + ")");
  if (config.epochs == 1) return config.lr_start;
  if (epoch == config.epochs - 1) return config.lr_end;
  const double fraction = double(epoch) / double(config.epochs - 1);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, fraction);
}

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch},
          {"learning_rate", learning_rate},
          {"train", breakdown_json(train)},
          {"validation", breakdown_json(validation)},
          {"val_accuracy", val_accuracy},
          {"val_nmi", val_nmi},
          {"seconds", seconds}};
}

std::vector<std::string> training_ids(const TrainConfig& config, const dataio::SplitManifest& manifest) {
  std::vector<std::string> ids = manifest.train_ids;
  if (config.train_limit == 0 || config.train_limit >= ids.size()) return ids;
  std::mt19937_64 rng(epoch_seed(config.seed, -2, 3));
  for (std::size_t i = 0; i < config.train_limit; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(config.train_limit);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::pair<torch::Tensor, torch::Tensor> make_batch(const std::vector<const dsp::SpectrogramSample*>& samples,
                                                   torch::ScalarType dtype) {
  if (samples.empty()) throw std::invalid_argument("make_batch: empty batch");
  const auto f = std::int64_t(samples.front()->freq_bins);
  const auto t = std::int64_t(samples.front()->frames);
  const auto b = std::int64_t(samples.size());
  auto x = torch::empty({b, 1, f, t}, torch::kFloat);
  auto mask = torch::empty({b, t}, torch::kFloat);
  float* xp = x.data_ptr<float>();
  float* mp = mask.data_ptr<float>();
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& s = *samples[std::size_t(i)];
    if (std::int64_t(s.freq_bins) != f || std::int64_t(s.frames) != t)
      throw std::invalid_argument("make_batch: samples differ in shape");
    std::copy(s.grid.begin(), s.grid.end(), xp + i * f * t);
    for (std::int64_t k = 0; k < t; ++k) mp[i * t + k] = float(s.mask[std::size_t(k)]);
  }
  return {x.to(dtype), mask.to(dtype)};
}

EncodedSplit encode_split(model::UvacModel& model, const std::vector<const dsp::SpectrogramSample*>& samples,
                          int batch_size) {
  check_shapes(samples, model->config());
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  const auto d = model->config().latent_dim;
  const auto dtype = model->prior->means.scalar_type();
  EncodedSplit out;
  out.means.resize(Eigen::Index(samples.size()), d);
  for (std::size_t start = 0; start < samples.size(); start += std::size_t(batch_size)) {
    const std::size_t end = std::min(samples.size(), start + std::size_t(batch_size));
    const std::vector<const dsp::SpectrogramSample*> batch(samples.begin() + std::ptrdiff_t(start),
                                                           samples.begin() + std::ptrdiff_t(end));
    const auto [x, mask] = make_batch(batch, dtype);
    const auto mu = model->encode(x).first;
    const auto labels = model::argmax_rows(model->prior->responsibilities(mu));
    const auto mu_d = mu.to(torch::kDouble).contiguous();
    const auto acc = mu_d.accessor<double, 2>();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::int64_t j = 0; j < d; ++j) out.means(Eigen::Index(start + i), j) = acc[std::int64_t(i)][j];
      out.predicted.push_back(labels[i]);
      out.truth.push_back(batch[i]->digit);
    }
  }
  model->train(was_training);
  return out;
}

TrainResult train(const TrainConfig& config, const dsp::SpectrogramDataset& dataset,
                  const dataio::SplitManifest& manifest, const fs::path& out_dir, const EpochCallback& on_epoch) {
  config.validate();
  fs::create_directories(out_dir);
  const auto ids = training_ids(config, manifest);
  if (ids.empty()) throw std::invalid_argument("train: empty training split");
  const auto train_samples = dataset.select(ids);
  const auto val_samples = dataset.select(manifest.val_ids);
  check_shapes(train_samples, config.model);
  check_shapes(val_samples, config.model);

  TrainResult result;
  result.latest_checkpoint = out_dir / "latest.pt";
  result.best_checkpoint = out_dir / "best.pt";
  const fs::path log_path = out_dir / "epochs.jsonl";

  model::UvacModel model(config.model);
  model->init_parameters(config.seed);
  int start_epoch = 0;
  double best = std::numeric_limits<double>::infinity();
  const bool resuming = config.resume && fs::exists(result.latest_checkpoint);
  if (resuming) {
    auto loaded = checkpoint::load(result.latest_checkpoint);
    if (loaded.meta.dsp_hash != dataset.dsp_hash() || loaded.meta.manifest_hash != manifest.content_hash())
      throw std::runtime_error("resume: checkpoint was trained on different data or preprocessing");
    if (comparable(TrainConfig::from_json(nlohmann::json::parse(loaded.meta.train_config_json))) != comparable(config))
      throw std::runtime_error("resume: training configuration differs from the checkpoint's");
    model = loaded.model;
    start_epoch = int(loaded.meta.epoch);
    best = loaded.meta.best_validation_loss;
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }

  torch::optim::Adam optimizer(model->parameters(),
                               torch::optim::AdamOptions(config.lr_start).betas({0.9, 0.999}).eps(1e-8));
  if (resuming) checkpoint::load_optimizer(result.latest_checkpoint, optimizer);

  checkpoint::CheckpointMeta meta;
  meta.dsp_hash = dataset.dsp_hash();
  meta.manifest_hash = manifest.content_hash();
  meta.model_config_json = config.model.to_json();
  meta.train_config_json = config.to_json().dump();
  meta.seed = config.seed;

  const loss::LossOptions loss_options{config.recon, config.kl_weight};
  std::vector<std::size_t> order(train_samples.size());

  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.learning_rate = lr_schedule(epoch, config);
    set_learning_rate(optimizer, record.learning_rate);

    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(epoch_seed(config.seed, epoch, 0));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    auto generator = at::detail::createCPUGenerator(epoch_seed(config.seed, epoch, 1));

    model->train();
    LossAccumulator train_acc;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(config.batch_size));
      std::vector<const dsp::SpectrogramSample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_samples[order[i]]);
      const auto [x, mask] = make_batch(batch);

      optimizer.zero_grad();
      const auto terms = loss::elbo_loss(model, x, mask, config.mc_samples, generator, loss_options);
      const auto values = terms.values();
      if (!std::isfinite(values.total)) {
        std::string listing;
        for (const auto* s : batch) listing += s->clip_id + "\n";
        std::ofstream(out_dir / "nonfinite_batch.txt") << "epoch " << epoch << "\n" << listing;
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + " (batch ids written to " +
                                 (out_dir / "nonfinite_batch.txt").string() + ")");
      }
      terms.total.backward();
      if (config.max_grad_norm > 0.0) torch::nn::utils::clip_grad_norm_(model->parameters(), config.max_grad_norm);
      optimizer.step();
      train_acc.add(values, double(batch.size()));
    }
    record.train = train_acc.mean();

    model->eval();
    if (!val_samples.empty()) {
      record.validation = validation_loss(model, val_samples, config);
      const auto encoded = encode_split(model, val_samples);
      record.val_accuracy = metrics::unsupervised_accuracy(encoded.predicted, encoded.truth);
      record.val_nmi = metrics::nmi(encoded.predicted, encoded.truth);
    } else {
      record.validation = record.train;
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    meta.epoch = epoch + 1;
    const bool improved = record.validation.total < best;
    if (improved) best = record.validation.total;
    meta.best_validation_loss = best;
    checkpoint::save(result.latest_checkpoint, model, &optimizer, meta);
    if (improved) fs::copy_file(result.latest_checkpoint, result.best_checkpoint, fs::copy_options::overwrite_existing);
    std::ofstream(log_path, std::ios::app) << record.to_json().dump() << "\n";

    result.history.push_back(record);
    if (on_epoch && !on_epoch(record)) break;
  }
  if (!fs::exists(result.best_checkpoint) && fs::exists(result.latest_checkpoint))
    fs::copy_file(result.latest_checkpoint, result.best_checkpoint, fs::copy_options::overwrite_existing);
  return result;
}

metrics::MetricsReport evaluate_checkpoint(const fs::path& checkpoint_path, const dsp::SpectrogramDataset& dataset,
                                           const std::vector<std::string>& ids) {
  auto loaded = checkpoint::load(checkpoint_path);
  if (loaded.meta.dsp_hash != dataset.dsp_hash())
    throw std::runtime_error("refusing to evaluate " + checkpoint_path.string() +
                             ": it was trained with different preprocessing (dsp hash mismatch)");
  if (ids.empty()) throw std::invalid_argument("evaluate_checkpoint: no samples to evaluate");
  const auto encoded = encode_split(loaded.model, dataset.select(ids));
  return metrics::evaluate(encoded.means, encoded.predicted, encoded.truth);
}

}  // namespace uvac::trainer
