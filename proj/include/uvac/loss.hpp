#pragma once

#include <torch/torch.h>

#include "uvac/model.hpp"

namespace uvac::loss {

enum class ReconFamily {
  Bernoulli,  // per-bin binary cross-entropy
  Gaussian,   // per-bin squared error (unit-variance Gaussian up to constants)
};

/// Scalar view of one evaluation of the objective.
struct LossBreakdown {
  double reconstruction = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

/// Batch-mean loss terms with autograd history.
struct LossTerms {
  torch::Tensor reconstruction;
  torch::Tensor kl;
  torch::Tensor total;
  LossBreakdown values() const;
};

struct LossOptions {
  ReconFamily family = ReconFamily::Bernoulli;
  double kl_weight = 1.0;
};

/// Per-sample negative log-likelihood, summed over bins: x, x_hat [B, (1,) F, T]; mask [B, T].
/// Bins in frames with mask 0 contribute exactly zero whatever their values. For the Bernoulli
/// family x_hat must lie strictly inside (0, 1).
torch::Tensor reconstruction_nll(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask,
                                 ReconFamily family = ReconFamily::Bernoulli);

/// Same quantity from decoder logits (x_hat = sigmoid(logits)), computed stably.
torch::Tensor reconstruction_nll_from_logits(const torch::Tensor& x, const torch::Tensor& logits,
                                             const torch::Tensor& mask,
                                             ReconFamily family = ReconFamily::Bernoulli);

/// -log sum_c pi_c exp(-KL(q || N_c)) for diagonal q = N(mu, exp(log_var)): [B, d] -> [B].
torch::Tensor kl_gaussian_vs_gmm(const torch::Tensor& mu, const torch::Tensor& log_var, const model::GmmPrior& prior);
double kl_gaussian_vs_gmm(const model::LatentGaussian& latent, const model::GmmPrior& prior);

/// Negative lower bound averaged over the batch. eps is [M, B, d]; the reconstruction term is
/// averaged over the M reparametrized draws.
LossTerms elbo_loss(model::UvacModel& model, const torch::Tensor& x, const torch::Tensor& mask,
                    const torch::Tensor& eps, const LossOptions& options = {});

/// Draws eps ~ N(0, I) with `generator`.
LossTerms elbo_loss(model::UvacModel& model, const torch::Tensor& x, const torch::Tensor& mask, int mc_samples,
                    torch::Generator& generator, const LossOptions& options = {});

}  // namespace uvac::loss
