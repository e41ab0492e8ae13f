#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "uvac/common.hpp"

namespace uvac::baselines {

struct KMeansResult {
  RowMatrix centroids;  // k x d
  Labels assignments;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step of the kept restart
};

struct KMeansOptions {
  int max_iters = 300;
  int restarts = 10;
  std::uint64_t seed = 0;
};

/// k-means++ seeding followed by Lloyd iterations; best inertia over `restarts` runs.
KMeansResult kmeans_fit(const RowMatrix& points, int k, const KMeansOptions& options = {});

struct GmmEmResult {
  Eigen::VectorXd weights;  // k
  RowMatrix means;          // k x d
  RowMatrix variances;      // k x d, diagonal
  std::vector<double> log_likelihood_history;
  RowMatrix responsibilities;  // n x k
  Labels assignments;
};

struct GmmEmOptions {
  int max_iters = 100;
  double tol = 1e-3;            // stop when the log-likelihood gain falls below this
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
  int kmeans_restarts = 1;      // for the initial partition
};

GmmEmResult gmm_em_fit(const RowMatrix& points, int k, const GmmEmOptions& options = {});

/// Total data log-likelihood under a diagonal mixture.
double gmm_log_likelihood(const RowMatrix& points, const Eigen::VectorXd& weights,
                          const RowMatrix& means, const RowMatrix& variances);

/// Nearest centroid, ties to the lowest index.
Labels assign(const KMeansResult& result, const RowMatrix& points);
/// Maximum responsibility, ties to the lowest index.
Labels assign(const GmmEmResult& result, const RowMatrix& points);

}  // namespace uvac::baselines
