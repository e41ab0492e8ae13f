#include "uvac/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace uvac::baselines {
namespace {

double squared_distance(const RowMatrix& a, Eigen::Index i, const RowMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

void check_points(const RowMatrix& points, int k, const char* who) {
  if (k < 1) throw std::invalid_argument(std::string(who) + ": k must be >= 1");
  if (points.rows() < k)
    throw std::invalid_argument(std::string(who) + ": need at least k=" + std::to_string(k) + " points, got " +
                                std::to_string(points.rows()));
  if (!points.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

// Nearest centroid for every point; returns the inertia.
double assign_nearest(const RowMatrix& points, const RowMatrix& centroids, Labels& labels,
                      std::vector<double>* distances = nullptr) {
  const Eigen::Index n = points.rows();
  labels.resize(std::size_t(n));
  if (distances != nullptr) distances->resize(std::size_t(n));
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = squared_distance(points, i, centroids, c);
      if (d < best) {
        best = d;
        arg = int(c);
      }
    }
    labels[std::size_t(i)] = arg;
    if (distances != nullptr) (*distances)[std::size_t(i)] = best;
    inertia += best;
  }
  return inertia;
}

RowMatrix kmeans_pp_seed(const RowMatrix& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  RowMatrix centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[std::size_t(i)] = squared_distance(points, i, centroids, 0);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[std::size_t(i)];
        if (target < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[std::size_t(i)] = std::min(d2[std::size_t(i)], squared_distance(points, i, centroids, c));
  }
  return centroids;
}

KMeansResult lloyd(const RowMatrix& points, RowMatrix centroids, int max_iters) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  KMeansResult r;
  Labels previous;
  std::vector<double> distances;
  for (int it = 0; it < max_iters; ++it) {
    r.inertia = assign_nearest(points, centroids, r.assignments, &distances);
    r.inertia_history.push_back(r.inertia);
    r.iterations = it + 1;
    if (it > 0 && r.assignments == previous) break;
    if (it + 1 == max_iters) break;
    previous = r.assignments;

    RowMatrix sums = RowMatrix::Zero(k, points.cols());
    std::vector<double> counts(std::size_t(k), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignments[std::size_t(i)]) += points.row(i);
      counts[std::size_t(r.assignments[std::size_t(i)])] += 1.0;
    }
    std::vector<bool> taken(std::size_t(n), false);
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[std::size_t(c)] > 0.0) {
        centroids.row(c) = sums.row(c) / counts[std::size_t(c)];
        continue;
      }
      // Empty cluster: move it onto the point farthest from its current centroid.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!taken[std::size_t(i)] && distances[std::size_t(i)] > far_d) {
          far_d = distances[std::size_t(i)];
          far = i;
        }
      taken[std::size_t(far)] = true;
      centroids.row(c) = points.row(far);
    }
  }
  r.centroids = std::move(centroids);
  return r;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// log(w_c) + log N(x_i; mu_c, diag(var_c)) for every point and component.
RowMatrix joint_log_density(const RowMatrix& points, const Eigen::VectorXd& weights, const RowMatrix& means,
                            const RowMatrix& variances) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = means.rows();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  RowMatrix out(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::RowVectorXd inv = variances.row(c).array().inverse();
    const double norm = -0.5 * (double(points.cols()) * log2pi + variances.row(c).array().log().sum());
    const double lw = std::log(weights[c]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double maha = ((points.row(i) - means.row(c)).array().square() * inv.array()).sum();
      out(i, c) = lw + norm - 0.5 * maha;
    }
  }
  return out;
}

// Returns the total log-likelihood and fills the responsibilities.
double e_step(const RowMatrix& points, const Eigen::VectorXd& weights, const RowMatrix& means,
              const RowMatrix& variances, RowMatrix& resp) {
  resp = joint_log_density(points, weights, means, variances);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    const double lse = log_sum_exp(resp.row(i).transpose());
    ll += lse;
    resp.row(i) = (resp.row(i).array() - lse).exp();
  }
  return ll;
}

Labels argmax_rows(const RowMatrix& m) {
  Labels out(std::size_t(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    int arg = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
      if (m(i, c) > m(i, arg)) arg = int(c);
    out[std::size_t(i)] = arg;
  }
  return out;
}

}  // namespace

KMeansResult kmeans_fit(const RowMatrix& points, int k, const KMeansOptions& options) {
  check_points(points, k, "kmeans_fit");
  if (options.max_iters < 1 || options.restarts < 1)
    throw std::invalid_argument("kmeans_fit: max_iters and restarts must be >= 1");
  std::mt19937_64 rng(options.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < options.restarts; ++restart) {
    KMeansResult r = lloyd(points, kmeans_pp_seed(points, k, rng), options.max_iters);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

double gmm_log_likelihood(const RowMatrix& points, const Eigen::VectorXd& weights, const RowMatrix& means,
                          const RowMatrix& variances) {
  RowMatrix resp;
  return e_step(points, weights, means, variances, resp);
}

GmmEmResult gmm_em_fit(const RowMatrix& points, int k, const GmmEmOptions& options) {
  check_points(points, k, "gmm_em_fit");
  if (options.max_iters < 0) throw std::invalid_argument("gmm_em_fit: max_iters must be >= 0");
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();

  const KMeansResult init =
      kmeans_fit(points, k, KMeansOptions{.max_iters = 300, .restarts = options.kmeans_restarts, .seed = options.seed});
  GmmEmResult r;
  r.means = init.centroids;
  r.weights = Eigen::VectorXd::Zero(k);
  r.variances = RowMatrix::Zero(k, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = init.assignments[std::size_t(i)];
    r.weights[c] += 1.0;
    r.variances.row(c) += (points.row(i) - r.means.row(c)).array().square().matrix();
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (r.weights[c] > 0.0) r.variances.row(c) /= r.weights[c];
    else r.variances.row(c).setConstant(1.0);
  }
  r.variances = r.variances.cwiseMax(options.variance_floor);
  r.weights /= double(n);
  r.weights = r.weights.cwiseMax(1e-300);
  r.weights /= r.weights.sum();

  double ll = e_step(points, r.weights, r.means, r.variances, r.responsibilities);
  r.log_likelihood_history.push_back(ll);
  for (int it = 0; it < options.max_iters; ++it) {
    const Eigen::VectorXd mass = r.responsibilities.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      if (mass[c] <= 1e-12) continue;  // dead component keeps its parameters
      const Eigen::RowVectorXd mu = (r.responsibilities.col(c).transpose() * points) / mass[c];
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i)
        var += r.responsibilities(i, c) * (points.row(i) - mu).array().square().matrix();
      r.means.row(c) = mu;
      r.variances.row(c) = (var / mass[c]).cwiseMax(options.variance_floor);
    }
    r.weights = (mass / double(n)).cwiseMax(1e-300);
    r.weights /= r.weights.sum();

    const double next = e_step(points, r.weights, r.means, r.variances, r.responsibilities);
    r.log_likelihood_history.push_back(next);
    const double gain = next - ll;
    ll = next;
    if (gain < options.tol) break;
  }
  r.assignments = assign(r, points);
  return r;
}

Labels assign(const KMeansResult& result, const RowMatrix& points) {
  if (points.cols() != result.centroids.cols())
    throw std::invalid_argument("assign: point dimension " + std::to_string(points.cols()) +
                                " does not match centroids (" + std::to_string(result.centroids.cols()) + ")");
  Labels labels;
  assign_nearest(points, result.centroids, labels);
  return labels;
}

Labels assign(const GmmEmResult& result, const RowMatrix& points) {
  if (points.cols() != result.means.cols())
    throw std::invalid_argument("assign: point dimension " + std::to_string(points.cols()) +
                                " does not match the mixture (" + std::to_string(result.means.cols()) + ")");
  return argmax_rows(joint_log_density(points, result.weights, result.means, result.variances));
}

}  // namespace uvac::baselines
