#pragma once

// Brute-force and direct-definition references, deliberately naive.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "uvac/common.hpp"

namespace uvac::testing {

inline double brute_force_assignment(const RowMatrix& cost) {
  const int n = int(cost.rows());
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost(i, p[i]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

/// Best accuracy over every injective relabeling of predicted ids onto truth ids (in percent).
inline double brute_force_accuracy(const Labels& pred, const Labels& truth) {
  std::vector<int> pv(pred.begin(), pred.end()), tv(truth.begin(), truth.end());
  std::sort(pv.begin(), pv.end());
  pv.erase(std::unique(pv.begin(), pv.end()), pv.end());
  std::sort(tv.begin(), tv.end());
  tv.erase(std::unique(tv.begin(), tv.end()), tv.end());
  const std::size_t k = std::max(pv.size(), tv.size());
  // Pad truth ids with values that never occur so every predicted id has a target.
  while (tv.size() < k) tv.push_back(std::numeric_limits<int>::min() + int(tv.size()));
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::map<int, int> map;
    for (std::size_t i = 0; i < pv.size(); ++i) map[pv[i]] = tv[perm[i]];
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += map[pred[i]] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return 100.0 * double(best) / double(pred.size());
}

inline double entropy_of(const Labels& x) {
  std::map<int, double> c;
  for (int v : x) c[v] += 1.0;
  double h = 0.0;
  for (auto& [k, n] : c) {
    const double p = n / double(x.size());
    h -= p * std::log(p);
  }
  return h;
}

inline double direct_nmi(const Labels& a, const Labels& b, bool geometric = false) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  const double n = double(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0 / n;
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (auto& [key, p] : joint) mi += p * std::log(p / (pa[key.first] * pb[key.second]));
  const double ha = entropy_of(a), hb = entropy_of(b);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  return geometric ? mi / std::sqrt(ha * hb) : mi / (0.5 * (ha + hb));
}

inline double euclid(const RowMatrix& x, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) s += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
  return std::sqrt(s);
}

inline double direct_silhouette(const RowMatrix& x, const Labels& labels) {
  const std::size_t n = labels.size();
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& own = members[labels[i]];
    if (own.size() == 1) continue;
    double a = 0.0;
    for (auto j : own) a += euclid(x, Eigen::Index(i), Eigen::Index(j));
    a /= double(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (auto& [c, idx] : members) {
      if (c == labels[i]) continue;
      double d = 0.0;
      for (auto j : idx) d += euclid(x, Eigen::Index(i), Eigen::Index(j));
      b = std::min(b, d / double(idx.size()));
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / double(n);
}

inline double direct_dbi(const RowMatrix& x, const Labels& labels) {
  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(Eigen::Index(i));
  std::vector<Eigen::VectorXd> centroid;
  std::vector<double> scatter;
  for (auto& [c, idx] : members) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(x.cols());
    for (auto i : idx) mu += x.row(i).transpose();
    mu /= double(idx.size());
    double s = 0.0;
    for (auto i : idx) s += (x.row(i).transpose() - mu).norm();
    centroid.push_back(mu);
    scatter.push_back(s / double(idx.size()));
  }
  const std::size_t k = centroid.size();
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (i != j) worst = std::max(worst, (scatter[i] + scatter[j]) / (centroid[i] - centroid[j]).norm());
    total += worst;
  }
  return total / double(k);
}

}  // namespace uvac::testing
