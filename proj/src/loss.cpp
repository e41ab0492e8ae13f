#include "uvac/loss.hpp"

#include <stdexcept>
#include <string>

namespace uvac::loss {
namespace {

// Brings x/x_hat to [B, F, T] and checks the mask against them.
std::pair<torch::Tensor, torch::Tensor> align(const torch::Tensor& x, const torch::Tensor& y,
                                              const torch::Tensor& mask) {
  auto a = x.dim() == 4 ? x.squeeze(1) : x;
  auto b = y.dim() == 4 ? y.squeeze(1) : y;
  if (a.dim() != 3 || a.sizes() != b.sizes())
    throw std::invalid_argument("reconstruction: target " + c10::str(x.sizes()) + " and prediction " +
                                c10::str(y.sizes()) + " differ in shape");
  if (mask.dim() != 2 || mask.size(0) != a.size(0) || mask.size(1) != a.size(2))
    throw std::invalid_argument("reconstruction: mask " + c10::str(mask.sizes()) + " does not match [B, T] of " +
                                c10::str(a.sizes()));
  return {a, b};
}

torch::Tensor active(const torch::Tensor& mask, const torch::Tensor& like) {
  return (mask > 0.5).unsqueeze(1).expand_as(like);
}

}  // namespace

LossBreakdown LossTerms::values() const {
  return {reconstruction.item<double>(), kl.item<double>(), total.item<double>()};
}

torch::Tensor reconstruction_nll(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask,
                                 ReconFamily family) {
  const auto [target, pred] = align(x, x_hat, mask);
  if (family == ReconFamily::Bernoulli) {
    const bool inside = torch::all(pred > 0).item<bool>() && torch::all(pred < 1).item<bool>();
    if (!inside) throw std::invalid_argument("reconstruction_nll: prediction outside (0, 1)");
  }
  // Selecting rather than multiplying keeps masked bins out of the result bit for bit.
  const auto on = active(mask, target);
  torch::Tensor per_bin;
  if (family == ReconFamily::Bernoulli) {
    per_bin = -(target * torch::log(pred) + (1 - target) * torch::log1p(-pred));
  } else {
    per_bin = (target - pred).pow(2);
  }
  return torch::where(on, per_bin, torch::zeros_like(per_bin)).sum({1, 2});
}

torch::Tensor reconstruction_nll_from_logits(const torch::Tensor& x, const torch::Tensor& logits,
                                             const torch::Tensor& mask, ReconFamily family) {
  const auto [target, lg] = align(x, logits, mask);
  const auto on = active(mask, target);
  torch::Tensor per_bin;
  if (family == ReconFamily::Bernoulli) {
    // -[x log s(l) + (1 - x) log(1 - s(l))] = softplus(l) - x l
    per_bin = torch::nn::functional::softplus(lg) - target * lg;
  } else {
    per_bin = (target - torch::sigmoid(lg)).pow(2);
  }
  return torch::where(on, per_bin, torch::zeros_like(per_bin)).sum({1, 2});
}

torch::Tensor kl_gaussian_vs_gmm(const torch::Tensor& mu, const torch::Tensor& log_var, const model::GmmPrior& prior) {
  if (mu.dim() != 2 || mu.sizes() != log_var.sizes() || mu.size(1) != prior->latent_dim())
    throw std::invalid_argument("kl_gaussian_vs_gmm: expected mu and log_var of shape [B, " +
                                std::to_string(prior->latent_dim()) + "]");
  const auto q_mu = mu.unsqueeze(1);         // [B, 1, d]
  const auto q_logvar = log_var.unsqueeze(1);
  const auto c_mu = prior->means.unsqueeze(0);  // [1, C, d]
  const auto c_logvar = prior->log_vars.unsqueeze(0);
  const auto c_var = torch::exp(c_logvar);
  // Per component: sum_j [(mu - mu_c)^2 / S_c + log(S_c / S) - 1 + S / S_c] = 2 KL(q || N_c).
  const auto bracket =
      ((q_mu - c_mu).pow(2) / c_var + (c_logvar - q_logvar) - 1.0 + torch::exp(q_logvar - c_logvar)).sum(-1);
  return -torch::logsumexp(prior->log_weights().unsqueeze(0) - 0.5 * bracket, 1);
}

double kl_gaussian_vs_gmm(const model::LatentGaussian& latent, const model::GmmPrior& prior) {
  if (latent.mu.size() != latent.var.size())
    throw std::invalid_argument("kl_gaussian_vs_gmm: mu and var differ in length");
  for (double v : latent.var)
    if (!(v > 0.0)) throw std::invalid_argument("kl_gaussian_vs_gmm: variances must be strictly positive");
  torch::NoGradGuard no_grad;
  const auto opts = torch::dtype(prior->means.scalar_type());
  const auto mu = torch::tensor(latent.mu, torch::kDouble).to(opts).unsqueeze(0);
  const auto log_var = torch::log(torch::tensor(latent.var, torch::kDouble)).to(opts).unsqueeze(0);
  return kl_gaussian_vs_gmm(mu, log_var, prior).item<double>();
}

LossTerms elbo_loss(model::UvacModel& model, const torch::Tensor& x, const torch::Tensor& mask,
                    const torch::Tensor& eps, const LossOptions& options) {
  if (x.size(0) == 0) throw std::invalid_argument("elbo_loss: empty batch");
  const auto batch = x.size(0);
  const auto d = model->config().latent_dim;
  if (eps.dim() != 3 || eps.size(1) != batch || eps.size(2) != d || eps.size(0) < 1)
    throw std::invalid_argument("elbo_loss: eps must be [M, " + std::to_string(batch) + ", " + std::to_string(d) +
                                "], got " + c10::str(eps.sizes()));
  const auto m = eps.size(0);

  const auto [mu, log_var] = model->encode(x);
  // All M draws go through the decoder as one batch of M * B latents.
  const auto z = model::reparameterize(mu.unsqueeze(0).expand({m, batch, d}),
                                       log_var.unsqueeze(0).expand({m, batch, d}), eps)
                     .reshape({m * batch, d});
  const auto logits = model->decode_logits(z);
  const auto target = x.repeat({m, 1, 1, 1});
  const auto masks = mask.repeat({m, 1});
  const auto recon = reconstruction_nll_from_logits(target, logits, masks, options.family)
                         .view({m, batch})
                         .mean(0);  // [B]
  const auto kl = kl_gaussian_vs_gmm(mu, log_var, model->prior);

  LossTerms terms;
  terms.reconstruction = recon.mean();
  terms.kl = kl.mean();
  terms.total = terms.reconstruction + options.kl_weight * terms.kl;
  return terms;
}

LossTerms elbo_loss(model::UvacModel& model, const torch::Tensor& x, const torch::Tensor& mask, int mc_samples,
                    torch::Generator& generator, const LossOptions& options) {
  if (mc_samples < 1) throw std::invalid_argument("elbo_loss: mc_samples must be >= 1");
  const auto eps = torch::randn({mc_samples, x.size(0), model->config().latent_dim}, generator,
                                torch::dtype(model->prior->means.scalar_type()));
  return elbo_loss(model, x, mask, eps, options);
}

}  // namespace uvac::loss
