#include "uvac/tsne.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace uvac::viz {
namespace {

// Row-conditional affinities p(j|i) with each bandwidth tuned to the target perplexity.
RowMatrix conditional_affinities(const RowMatrix& d2, double perplexity) {
  const Eigen::Index n = d2.rows();
  const double target = std::log(perplexity);
  RowMatrix p = RowMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 200; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double v = std::exp(-beta * d2(i, j));
        p(i, j) = v;
        sum += v;
        weighted += v * d2(i, j);
      }
      if (sum <= 0.0) {
        // beta too large for this row's distances
        hi = beta;
        beta = 0.5 * (lo + hi);
        continue;
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      p.row(i) /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
      } else {
        hi = beta;
        beta = 0.5 * (lo + hi);
      }
    }
  }
  return p;
}

}  // namespace

TsneResult tsne(const RowMatrix& features, const TsneOptions& options) {
  const Eigen::Index n = features.rows();
  if (n < 10) throw std::invalid_argument("tsne: need at least 10 points, got " + std::to_string(n));
  if (!features.allFinite()) throw std::invalid_argument("tsne: non-finite features");
  TsneResult result;
  const double perplexity = std::min(options.perplexity, double(n - 1) / 3.0);

  RowMatrix d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) d2(i, j) = d2(j, i) = (features.row(i) - features.row(j)).squaredNorm();
  }
  const double max_d2 = d2.maxCoeff();
  if (max_d2 <= 0.0) result.warnings.push_back("all points identical; embedding is a single blob");
  else d2 /= max_d2;

  RowMatrix p = conditional_affinities(d2, perplexity);
  p = (p + p.transpose()).eval();
  p /= p.sum();
  p = p.cwiseMax(1e-12);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1e-4);
  RowMatrix y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) y(i, 0) = normal(rng), y(i, 1) = normal(rng);
  RowMatrix velocity = RowMatrix::Zero(n, 2);
  RowMatrix gains = RowMatrix::Ones(n, 2);
  RowMatrix num(n, n);
  RowMatrix grad(n, 2);

  for (int it = 0; it < options.iterations; ++it) {
    const double exaggeration = it < options.exaggeration_iters ? options.exaggeration : 1.0;
    const double momentum = it < options.exaggeration_iters ? 0.5 : 0.8;
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = num(j, i) = v;
        z += 2.0 * v;
      }
    }
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double coeff = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
        grad.row(i) += 4.0 * coeff * (y.row(i) - y.row(j));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < 2; ++k) {
        const bool same_sign = (grad(i, k) > 0) == (velocity(i, k) > 0);
        gains(i, k) = same_sign ? std::max(0.01, gains(i, k) * 0.8) : gains(i, k) + 0.2;
        velocity(i, k) = momentum * velocity(i, k) - options.learning_rate * gains(i, k) * grad(i, k);
        y(i, k) += velocity(i, k);
      }
    y.rowwise() -= y.colwise().mean();
  }
  result.coords = std::move(y);
  return result;
}

}  // namespace uvac::viz
