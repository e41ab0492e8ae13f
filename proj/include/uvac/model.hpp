#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace uvac::model {

/// Network shape. Defaults give the full 128 x 99 model (about 2M parameters).
struct ModelConfig {
  std::int64_t freq_bins = 128;
  std::int64_t time_frames = 99;
  std::vector<std::int64_t> conv_channels{16, 32, 64, 128};
  std::int64_t kernel = 8;
  std::int64_t stride = 2;
  std::int64_t padding = 3;
  std::int64_t gru_hidden = 128;
  std::int64_t gru_layers = 2;
  std::int64_t latent_dim = 10;
  std::int64_t components = 10;

  /// 16 x 12 input, two conv blocks, d_z = 2, C = 2; small enough for finite differences.
  static ModelConfig downsized();
  void validate() const;
  std::string to_json() const;
  /// Missing keys keep their defaults.
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

/// Diagonal Gaussian q(z|x) for one sample.
struct LatentGaussian {
  std::vector<double> mu;
  std::vector<double> var;
};

/// Responsibilities q(c|x) and their argmax (lowest index on ties).
struct ClusterAssignment {
  std::vector<double> responsibilities;
  int cluster = 0;
};

/// Trainable mixture prior: pi = softmax(mixing_logits), Sigma_c = exp(log_vars[c]).
class GmmPriorImpl : public torch::nn::Module {
 public:
  GmmPriorImpl(std::int64_t components, std::int64_t latent_dim);

  std::int64_t components() const { return mixing_logits.size(0); }
  std::int64_t latent_dim() const { return means.size(1); }

  torch::Tensor log_weights() const { return torch::log_softmax(mixing_logits, 0); }
  torch::Tensor weights() const { return torch::softmax(mixing_logits, 0); }
  torch::Tensor variances() const { return torch::exp(log_vars); }

  /// log N(z_b; mu_c, Sigma_c) for every row of z: [B, d] -> [B, C].
  torch::Tensor log_component_density(const torch::Tensor& z) const;
  /// q(c|z) for every row: [B, C]; computed with log-sum-exp.
  torch::Tensor responsibilities(const torch::Tensor& z) const;

  torch::Tensor mixing_logits;  // [C]
  torch::Tensor means;          // [C, d]
  torch::Tensor log_vars;       // [C, d]
};
TORCH_MODULE(GmmPrior);

/// Conv blocks (Conv2d + BatchNorm2d + ReLU) -> GRU over time -> mean over time -> Linear(hidden, 2 d_z).
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& config);

  /// x: [B, 1, F, T] -> (mu [B, d], log_var [B, d]).
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x);

  /// Spatial size (freq, time) at the input of each conv block, then after the last one.
  const std::vector<std::pair<std::int64_t, std::int64_t>>& shape_ladder() const { return ladder_; }

  torch::nn::Sequential convs{nullptr};
  torch::nn::GRU gru{nullptr};
  torch::nn::Linear to_latent{nullptr};

 private:
  ModelConfig config_;
  std::vector<std::pair<std::int64_t, std::int64_t>> ladder_;
};
TORCH_MODULE(Encoder);

/// Linear(d_z, channels * seed map) -> transposed conv blocks (ReLU, none after the last).
/// output_padding per block inverts the encoder's size ladder exactly.
class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(const ModelConfig& config, std::vector<std::pair<std::int64_t, std::int64_t>> ladder);

  /// z: [B, d] -> logits [B, 1, F, T].
  torch::Tensor forward(const torch::Tensor& z);

  torch::nn::Linear from_latent{nullptr};
  torch::nn::ModuleList deconvs{nullptr};

 private:
  ModelConfig config_;
  std::vector<std::pair<std::int64_t, std::int64_t>> ladder_;
};
TORCH_MODULE(Decoder);

struct ParameterCount {
  std::int64_t total = 0;
  std::int64_t inference = 0;  // encoder (with its latent head) + prior
  std::int64_t encoder = 0;
  std::int64_t decoder = 0;
  std::int64_t prior = 0;
};

class UvacModelImpl : public torch::nn::Module {
 public:
  explicit UvacModelImpl(const ModelConfig& config = {});

  const ModelConfig& config() const { return config_; }

  std::pair<torch::Tensor, torch::Tensor> encode(const torch::Tensor& x) { return encoder->forward(x); }
  torch::Tensor decode_logits(const torch::Tensor& z) { return decoder->forward(z); }
  torch::Tensor decode(const torch::Tensor& z) { return torch::sigmoid(decoder->forward(z)); }

  /// Kaiming-uniform weights, zero biases; prior weights ~ U(0,1) normalized, means
  /// Xavier-uniform, log-variances 0.
  void init_parameters(std::uint64_t seed);
  ParameterCount count_parameters() const;

  Encoder encoder{nullptr};
  Decoder decoder{nullptr};
  GmmPrior prior{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(UvacModel);

/// Exact number of trainable scalars in a module.
std::int64_t count_trainable(const torch::nn::Module& module);

/// Checks a single grid against the configured input shape and returns it as [1, 1, F, T].
torch::Tensor grid_tensor(const std::vector<float>& grid, const ModelConfig& config);

/// Evaluation-mode encoding of one grid.
LatentGaussian encode(UvacModel& model, const std::vector<float>& grid);
/// Evaluation-mode decoding to probabilities, row-major F x T.
std::vector<float> decode(UvacModel& model, const std::vector<double>& z);

/// z = mu + sqrt(var) * eps.
std::vector<double> reparameterize(const LatentGaussian& latent, const std::vector<double>& eps);
torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& log_var, const torch::Tensor& eps);

double prior_log_component_density(const GmmPrior& prior, const std::vector<double>& z, std::int64_t component);
ClusterAssignment responsibilities(const GmmPrior& prior, const std::vector<double>& z);

/// Argmax over the last dimension with ties to the lowest index.
std::vector<int> argmax_rows(const torch::Tensor& probabilities);

}  // namespace uvac::model
