#include "uvac/checkpoint.hpp"

#include <stdexcept>

namespace uvac::checkpoint {
namespace {

void write_meta(torch::serialize::OutputArchive& archive, const CheckpointMeta& meta) {
  archive.write("meta.format_version", c10::IValue(meta.format_version));
  archive.write("meta.epoch", c10::IValue(meta.epoch));
  archive.write("meta.dsp_hash", c10::IValue(std::int64_t(meta.dsp_hash)));
  archive.write("meta.manifest_hash", c10::IValue(std::int64_t(meta.manifest_hash)));
  archive.write("meta.model_config", c10::IValue(meta.model_config_json));
  archive.write("meta.train_config", c10::IValue(meta.train_config_json));
  archive.write("meta.best_validation_loss", c10::IValue(meta.best_validation_loss));
  archive.write("meta.seed", c10::IValue(std::int64_t(meta.seed)));
}

CheckpointMeta read_meta(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
  CheckpointMeta meta;
  c10::IValue v;
  if (!archive.try_read("meta.format_version", v)) throw std::runtime_error(path.string() + ": not a uvac checkpoint");
  meta.format_version = v.toInt();
  if (meta.format_version != kFormatVersion)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(meta.format_version));
  archive.read("meta.epoch", v);
  meta.epoch = v.toInt();
  archive.read("meta.dsp_hash", v);
  meta.dsp_hash = std::uint32_t(v.toInt());
  archive.read("meta.manifest_hash", v);
  meta.manifest_hash = std::uint32_t(v.toInt());
  archive.read("meta.model_config", v);
  meta.model_config_json = v.toStringRef();
  archive.read("meta.train_config", v);
  meta.train_config_json = v.toStringRef();
  archive.read("meta.best_validation_loss", v);
  meta.best_validation_loss = v.toDouble();
  archive.read("meta.seed", v);
  meta.seed = std::uint64_t(v.toInt());
  return meta;
}

}  // namespace

void save(const std::filesystem::path& path, model::UvacModel& model, torch::optim::Optimizer* optimizer,
          const CheckpointMeta& meta) {
  torch::serialize::OutputArchive archive;
  write_meta(archive, meta);
  torch::serialize::OutputArchive weights;
  model->save(weights);
  archive.write("model", weights);
  if (optimizer != nullptr) {
    torch::serialize::OutputArchive state;
    optimizer->save(state);
    archive.write("optimizer", state);
  }
  const auto tmp = path.string() + ".tmp";
  archive.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

CheckpointMeta read_meta(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  return read_meta(archive, path);
}

Loaded load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  Loaded loaded;
  loaded.meta = read_meta(archive, path);
  loaded.model = model::UvacModel(model::ModelConfig::from_json(loaded.meta.model_config_json));
  torch::serialize::InputArchive weights;
  archive.read("model", weights);
  loaded.model->load(weights);
  return loaded;
}

void load_optimizer(const std::filesystem::path& path, torch::optim::Optimizer& optimizer) {
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  torch::serialize::InputArchive state;
  if (!archive.try_read("optimizer", state))
    throw std::runtime_error(path.string() + ": checkpoint has no optimizer state");
  optimizer.load(state);
}

}  // namespace uvac::checkpoint
