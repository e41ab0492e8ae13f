#include "uvac/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace uvac::model {
namespace {

std::int64_t conv_out(std::int64_t n, const ModelConfig& c) { return (n + 2 * c.padding - c.kernel) / c.stride + 1; }
std::int64_t deconv_out(std::int64_t n, const ModelConfig& c) { return (n - 1) * c.stride - 2 * c.padding + c.kernel; }

torch::Tensor to_row(const std::vector<double>& v, const torch::Tensor& like) {
  return torch::tensor(v, torch::dtype(torch::kDouble)).to(like.dtype()).unsqueeze(0);
}

// Flips a module to eval mode for the lifetime of the guard.
class EvalGuard {
 public:
  explicit EvalGuard(torch::nn::Module& m) : module_(m), was_training_(m.is_training()) { module_.eval(); }
  ~EvalGuard() { module_.train(was_training_); }

 private:
  torch::nn::Module& module_;
  bool was_training_;
};

}  // namespace

ModelConfig ModelConfig::downsized() {
  ModelConfig c;
  c.freq_bins = 16;
  c.time_frames = 12;
  c.conv_channels = {2, 4};
  c.gru_hidden = 4;
  c.gru_layers = 2;
  c.latent_dim = 2;
  c.components = 2;
  return c;
}

void ModelConfig::validate() const {
  if (freq_bins < 1 || time_frames < 1) throw std::invalid_argument("model: input dimensions must be positive");
  if (conv_channels.empty()) throw std::invalid_argument("model: at least one conv block required");
  for (auto ch : conv_channels)
    if (ch < 1) throw std::invalid_argument("model: conv channel counts must be positive");
  if (kernel < 1 || stride < 1 || padding < 0) throw std::invalid_argument("model: invalid kernel/stride/padding");
  if (gru_hidden < 1 || gru_layers < 1) throw std::invalid_argument("model: invalid recurrent size");
  if (latent_dim < 1 || components < 1) throw std::invalid_argument("model: latent_dim and components must be >= 1");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j = {{"freq_bins", freq_bins},   {"time_frames", time_frames}, {"conv_channels", conv_channels},
                      {"kernel", kernel},         {"stride", stride},           {"padding", padding},
                      {"gru_hidden", gru_hidden}, {"gru_layers", gru_layers},   {"latent_dim", latent_dim},
                      {"components", components}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
  ModelConfig c;
  c.freq_bins = j.value("freq_bins", c.freq_bins);
  c.time_frames = j.value("time_frames", c.time_frames);
  c.conv_channels = j.value("conv_channels", c.conv_channels);
  c.kernel = j.value("kernel", c.kernel);
  c.stride = j.value("stride", c.stride);
  c.padding = j.value("padding", c.padding);
  c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
  c.gru_layers = j.value("gru_layers", c.gru_layers);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.components = j.value("components", c.components);
  c.validate();
  return c;
}

GmmPriorImpl::GmmPriorImpl(std::int64_t components, std::int64_t latent_dim) {
  mixing_logits = register_parameter("mixing_logits", torch::zeros({components}));
  means = register_parameter("means", torch::zeros({components, latent_dim}));
  log_vars = register_parameter("log_vars", torch::zeros({components, latent_dim}));
}

torch::Tensor GmmPriorImpl::log_component_density(const torch::Tensor& z) const {
  if (z.dim() != 2 || z.size(1) != latent_dim())
    throw std::invalid_argument("prior: expected z of shape [B, " + std::to_string(latent_dim()) + "]");
  const auto diff = z.unsqueeze(1) - means.unsqueeze(0);  // [B, C, d]
  const auto maha = (diff.pow(2) / variances().unsqueeze(0)).sum(-1);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const auto log_norm = -0.5 * (double(latent_dim()) * log2pi + log_vars.sum(-1));  // [C]
  return log_norm.unsqueeze(0) - 0.5 * maha;
}

torch::Tensor GmmPriorImpl::responsibilities(const torch::Tensor& z) const {
  return torch::softmax(log_weights().unsqueeze(0) + log_component_density(z), 1);
}

EncoderImpl::EncoderImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  convs = torch::nn::Sequential();
  std::int64_t in = 1, f = config_.freq_bins, t = config_.time_frames;
  for (auto ch : config_.conv_channels) {
    ladder_.emplace_back(f, t);
    convs->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, ch, config_.kernel).stride(config_.stride).padding(config_.padding)));
    convs->push_back(torch::nn::BatchNorm2d(ch));
    convs->push_back(torch::nn::ReLU());
    f = conv_out(f, config_);
    t = conv_out(t, config_);
    if (f < 1 || t < 1)
      throw std::invalid_argument("model: input " + std::to_string(config_.freq_bins) + "x" +
                                  std::to_string(config_.time_frames) + " collapses to zero size in the conv stack");
    in = ch;
  }
  ladder_.emplace_back(f, t);
  register_module("convs", convs);
  gru = register_module("gru", torch::nn::GRU(torch::nn::GRUOptions(in * f, config_.gru_hidden)
                                                  .num_layers(config_.gru_layers)
                                                  .batch_first(true)));
  to_latent = register_module("to_latent", torch::nn::Linear(config_.gru_hidden, 2 * config_.latent_dim));
}

std::pair<torch::Tensor, torch::Tensor> EncoderImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != config_.freq_bins || x.size(3) != config_.time_frames)
    throw std::invalid_argument("encoder: expected input [B, 1, " + std::to_string(config_.freq_bins) + ", " +
                                std::to_string(config_.time_frames) + "], got " + c10::str(x.sizes()));
  auto h = convs->forward(x);  // [B, C, F', T']
  const auto b = h.size(0), c = h.size(1), f = h.size(2), t = h.size(3);
  h = h.permute({0, 3, 1, 2}).reshape({b, t, c * f});
  auto out = std::get<0>(gru->forward(h));  // [B, T', H]
  const auto stats = to_latent->forward(out.mean(1));
  const auto d = config_.latent_dim;
  return {stats.narrow(1, 0, d), stats.narrow(1, d, d)};
}

DecoderImpl::DecoderImpl(const ModelConfig& config, std::vector<std::pair<std::int64_t, std::int64_t>> ladder)
    : config_(config), ladder_(std::move(ladder)) {
  const auto& ch = config_.conv_channels;
  const auto [f0, t0] = ladder_.back();
  from_latent = register_module("from_latent", torch::nn::Linear(config_.latent_dim, ch.back() * f0 * t0));
  deconvs = torch::nn::ModuleList();
  for (std::size_t i = ch.size(); i-- > 0;) {
    const auto in = ch[i];
    const auto out = i == 0 ? 1 : ch[i - 1];
    const auto [f, t] = ladder_[i + 1];
    const auto [target_f, target_t] = ladder_[i];
    const auto pad_f = target_f - deconv_out(f, config_);
    const auto pad_t = target_t - deconv_out(t, config_);
    if (pad_f < 0 || pad_f >= config_.stride || pad_t < 0 || pad_t >= config_.stride)
      throw std::invalid_argument("model: decoder cannot invert encoder size " + std::to_string(target_f) + "x" +
                                  std::to_string(target_t));
    deconvs->push_back(torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(in, out, config_.kernel)
                                                      .stride(config_.stride)
                                                      .padding(config_.padding)
                                                      .output_padding({pad_f, pad_t})));
  }
  register_module("deconvs", deconvs);
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z) {
  if (z.dim() != 2 || z.size(1) != config_.latent_dim)
    throw std::invalid_argument("decoder: expected z of shape [B, " + std::to_string(config_.latent_dim) + "], got " +
                                c10::str(z.sizes()));
  const auto [f0, t0] = ladder_.back();
  auto h = from_latent->forward(z).view({z.size(0), config_.conv_channels.back(), f0, t0});
  const std::size_t n = deconvs->size();
  for (std::size_t i = 0; i < n; ++i) {
    h = deconvs[i]->as<torch::nn::ConvTranspose2d>()->forward(h);
    if (i + 1 < n) h = torch::relu(h);
  }
  return h;
}

UvacModelImpl::UvacModelImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  encoder = register_module("encoder", Encoder(config_));
  decoder = register_module("decoder", Decoder(config_, encoder->shape_ladder()));
  prior = register_module("prior", GmmPrior(config_.components, config_.latent_dim));
  init_parameters(0);
}

void UvacModelImpl::init_parameters(std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  torch::manual_seed(seed);
  for (auto& m : modules(/*include_self=*/false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_uniform_(conv->weight);
      torch::nn::init::zeros_(conv->bias);
    } else if (auto* deconv = m->as<torch::nn::ConvTranspose2d>()) {
      torch::nn::init::kaiming_uniform_(deconv->weight);
      torch::nn::init::zeros_(deconv->bias);
    } else if (auto* linear = m->as<torch::nn::Linear>()) {
      torch::nn::init::kaiming_uniform_(linear->weight);
      torch::nn::init::zeros_(linear->bias);
    } else if (auto* gru_layer = m->as<torch::nn::GRU>()) {
      for (auto& p : gru_layer->named_parameters(/*recurse=*/false)) {
        if (p.key().rfind("weight", 0) == 0) torch::nn::init::kaiming_uniform_(p.value());
        else torch::nn::init::zeros_(p.value());
      }
    } else if (auto* bn = m->as<torch::nn::BatchNorm2d>()) {
      bn->reset_parameters();
    }
  }
  auto pi = torch::rand({config_.components}, prior->mixing_logits.options());
  pi = pi.clamp_min(std::numeric_limits<float>::min());
  prior->mixing_logits.copy_(torch::log(pi / pi.sum()));
  torch::nn::init::xavier_uniform_(prior->means);
  prior->log_vars.zero_();
}

std::int64_t count_trainable(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters())
    if (p.requires_grad()) n += p.numel();
  return n;
}

ParameterCount UvacModelImpl::count_parameters() const {
  ParameterCount c;
  c.encoder = count_trainable(*encoder);
  c.decoder = count_trainable(*decoder);
  c.prior = count_trainable(*prior);
  c.total = c.encoder + c.decoder + c.prior;
  c.inference = c.encoder + c.prior;
  return c;
}

torch::Tensor grid_tensor(const std::vector<float>& grid, const ModelConfig& config) {
  if (std::int64_t(grid.size()) != config.freq_bins * config.time_frames)
    throw std::invalid_argument("grid has " + std::to_string(grid.size()) + " cells, expected " +
                                std::to_string(config.freq_bins) + "x" + std::to_string(config.time_frames));
  return torch::tensor(grid, torch::dtype(torch::kFloat)).view({1, 1, config.freq_bins, config.time_frames});
}

LatentGaussian encode(UvacModel& model, const std::vector<float>& grid) {
  EvalGuard eval(*model);
  torch::NoGradGuard no_grad;
  const auto dtype = model->prior->means.scalar_type();
  const auto [mu, log_var] = model->encode(grid_tensor(grid, model->config()).to(dtype));
  const auto mu_d = mu.to(torch::kDouble).contiguous();
  const auto var_d = log_var.exp().to(torch::kDouble).contiguous();
  LatentGaussian latent;
  latent.mu.assign(mu_d.data_ptr<double>(), mu_d.data_ptr<double>() + mu_d.numel());
  latent.var.assign(var_d.data_ptr<double>(), var_d.data_ptr<double>() + var_d.numel());
  return latent;
}

std::vector<float> decode(UvacModel& model, const std::vector<double>& z) {
  if (std::int64_t(z.size()) != model->config().latent_dim)
    throw std::invalid_argument("decode: latent of size " + std::to_string(z.size()) + ", expected " +
                                std::to_string(model->config().latent_dim));
  EvalGuard eval(*model);
  torch::NoGradGuard no_grad;
  const auto out = model->decode(to_row(z, model->prior->means)).to(torch::kFloat).contiguous();
  return {out.data_ptr<float>(), out.data_ptr<float>() + out.numel()};
}

std::vector<double> reparameterize(const LatentGaussian& latent, const std::vector<double>& eps) {
  if (latent.mu.size() != latent.var.size() || eps.size() != latent.mu.size())
    throw std::invalid_argument("reparameterize: eps has length " + std::to_string(eps.size()) + ", expected " +
                                std::to_string(latent.mu.size()));
  std::vector<double> z(eps.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = latent.mu[j] + std::sqrt(latent.var[j]) * eps[j];
  return z;
}

torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& log_var, const torch::Tensor& eps) {
  if (eps.sizes() != mu.sizes() || log_var.sizes() != mu.sizes())
    throw std::invalid_argument("reparameterize: shape mismatch between mu, log_var and eps");
  return mu + torch::exp(0.5 * log_var) * eps;
}

double prior_log_component_density(const GmmPrior& prior, const std::vector<double>& z, std::int64_t component) {
  if (component < 0 || component >= prior->components())
    throw std::out_of_range("prior component index " + std::to_string(component));
  torch::NoGradGuard no_grad;
  const auto zt = to_row(z, prior->means);
  return prior->log_component_density(zt)[0][component].item<double>();
}

ClusterAssignment responsibilities(const GmmPrior& prior, const std::vector<double>& z) {
  torch::NoGradGuard no_grad;
  const auto r = prior->responsibilities(to_row(z, prior->means)).to(torch::kDouble).contiguous();
  ClusterAssignment a;
  a.responsibilities.assign(r.data_ptr<double>(), r.data_ptr<double>() + r.numel());
  a.cluster = argmax_rows(r)[0];
  return a;
}

std::vector<int> argmax_rows(const torch::Tensor& probabilities) {
  const auto p = probabilities.to(torch::kDouble).contiguous();
  if (p.dim() != 2) throw std::invalid_argument("argmax_rows: expected a 2-D tensor");
  const auto acc = p.accessor<double, 2>();
  std::vector<int> out(std::size_t(p.size(0)));
  for (std::int64_t i = 0; i < p.size(0); ++i) {
    int arg = 0;
    for (std::int64_t c = 1; c < p.size(1); ++c)
      if (acc[i][c] > acc[i][arg]) arg = int(c);
    out[std::size_t(i)] = arg;
  }
  return out;
}

}  // namespace uvac::model
