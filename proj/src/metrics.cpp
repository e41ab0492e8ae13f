#include "uvac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace uvac::metrics {
namespace {

// Maps arbitrary label values to 0..K-1 in ascending order.
std::vector<int> compact(std::span<const int> labels, std::vector<int>* values = nullptr) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [value, id] : ids) id = next++;
  if (values != nullptr) {
    values->clear();
    for (const auto& [value, id] : ids) values->push_back(value);
  }
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
  return out;
}

void check_same_length(std::span<const int> a, std::span<const int> b, const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
}

double entropy(const Eigen::VectorXd& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (counts[i] > 0) h -= counts[i] / n * std::log(counts[i] / n);
  return h;
}

}  // namespace

Assignment hungarian(const RowMatrix& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.rows() != cost.cols()) throw std::invalid_argument("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: cost matrix has non-finite entries");
  Assignment result;
  if (n == 0) return result;

  // Shortest augmenting paths with row/column potentials; index 0 is a sentinel column.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t r = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost(r - 1, c - 1) - u[r] - v[c];
        if (reduced < minv[c]) {
          minv[c] = reduced;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  result.row_to_col.assign(n, -1);
  for (std::size_t c = 1; c <= n; ++c) result.row_to_col[match[c] - 1] = static_cast<int>(c - 1);
  for (std::size_t r = 0; r < n; ++r) result.cost += cost(r, result.row_to_col[r]);
  return result;
}

ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth) {
  check_same_length(pred, truth, "contingency");
  ContingencyTable t;
  const auto p = compact(pred, &t.pred_values);
  const auto q = compact(truth, &t.truth_values);
  t.counts = Eigen::MatrixXd::Zero(Eigen::Index(t.pred_values.size()), Eigen::Index(t.truth_values.size()));
  for (std::size_t i = 0; i < p.size(); ++i) t.counts(p[i], q[i]) += 1.0;
  t.total = p.size();
  return t;
}

double unsupervised_accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_same_length(pred, truth, "unsupervised_accuracy");
  if (pred.empty()) throw std::invalid_argument("unsupervised_accuracy: empty input");
  const ContingencyTable t = contingency(pred, truth);
  const Eigen::Index k = std::max(t.counts.rows(), t.counts.cols());
  RowMatrix cost = RowMatrix::Zero(k, k);
  cost.topLeftCorner(t.counts.rows(), t.counts.cols()) = -t.counts;
  const Assignment a = hungarian(cost);
  return 100.0 * (-a.cost) / double(t.total);
}

double nmi(std::span<const int> pred, std::span<const int> truth, NmiNormalization normalization) {
  check_same_length(pred, truth, "nmi");
  if (pred.empty()) throw std::invalid_argument("nmi: empty input");
  const ContingencyTable t = contingency(pred, truth);
  const double n = double(t.total);
  const Eigen::VectorXd a = t.counts.rowwise().sum();
  const Eigen::VectorXd b = t.counts.colwise().sum().transpose();
  if (a.size() == 1 && b.size() == 1) return 1.0;
  if (a.size() == 1 || b.size() == 1) return 0.0;

  double mi = 0.0;
  for (Eigen::Index i = 0; i < t.counts.rows(); ++i)
    for (Eigen::Index j = 0; j < t.counts.cols(); ++j) {
      const double nij = t.counts(i, j);
      if (nij > 0) mi += nij / n * std::log(n * nij / (a[i] * b[j]));
    }
  const double hu = entropy(a, n);
  const double hv = entropy(b, n);
  const double norm = normalization == NmiNormalization::Arithmetic ? 0.5 * (hu + hv) : std::sqrt(hu * hv);
  if (!(norm > 0.0)) return 0.0;
  return std::clamp(mi / norm, 0.0, 1.0);
}

double silhouette(const RowMatrix& features, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw std::invalid_argument("silhouette: labels and features differ in length");
  if (n < 3) throw std::invalid_argument("silhouette: need at least 3 points");
  std::vector<int> values;
  const auto c = compact(labels, &values);
  const std::size_t k = values.size();
  if (k < 2) throw std::invalid_argument("silhouette: need at least 2 clusters");

  std::vector<double> size(k, 0.0);
  for (int l : c) size[l] += 1.0;
  // dist_sum(i, q) = sum of distances from point i to the members of cluster q.
  RowMatrix dist_sum = RowMatrix::Zero(Eigen::Index(n), Eigen::Index(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (features.row(Eigen::Index(i)) - features.row(Eigen::Index(j))).norm();
      dist_sum(Eigen::Index(i), c[j]) += d;
      dist_sum(Eigen::Index(j), c[i]) += d;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int own = c[i];
    if (size[own] <= 1.0) continue;  // singleton scores 0
    const double a = dist_sum(Eigen::Index(i), own) / (size[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < k; ++q)
      if (int(q) != own) b = std::min(b, dist_sum(Eigen::Index(i), Eigen::Index(q)) / size[q]);
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / double(n);
}

double davies_bouldin(const RowMatrix& features, std::span<const int> labels, std::vector<std::string>* warnings) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw std::invalid_argument("davies_bouldin: labels and features differ in length");
  std::vector<int> values;
  const auto c = compact(labels, &values);
  const std::size_t k = values.size();
  if (k < 2) throw std::invalid_argument("davies_bouldin: need at least 2 clusters");

  RowMatrix centroids = RowMatrix::Zero(Eigen::Index(k), features.cols());
  std::vector<double> size(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    centroids.row(c[i]) += features.row(Eigen::Index(i));
    size[c[i]] += 1.0;
  }
  for (std::size_t q = 0; q < k; ++q) centroids.row(Eigen::Index(q)) /= size[q];
  std::vector<double> scatter(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    scatter[c[i]] += (features.row(Eigen::Index(i)) - centroids.row(c[i])).norm();
  for (std::size_t q = 0; q < k; ++q) scatter[q] /= size[q];

  const double inf = std::numeric_limits<double>::infinity();
  double total = 0.0;
  bool coincident = false;
  for (std::size_t p = 0; p < k; ++p) {
    double worst = 0.0;
    for (std::size_t q = 0; q < k; ++q) {
      if (p == q) continue;
      const double d = (centroids.row(Eigen::Index(p)) - centroids.row(Eigen::Index(q))).norm();
      double ratio;
      if (d > 0.0) {
        ratio = (scatter[p] + scatter[q]) / d;
      } else {
        ratio = inf;
        coincident = true;
      }
      worst = std::max(worst, ratio);
    }
    total += worst;
  }
  if (coincident && warnings != nullptr)
    warnings->push_back("davies_bouldin: coincident cluster centroids, index is +inf");
  return total / double(k);
}

std::string MetricsReport::to_text() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "accuracy_pct %.17g\nnmi %.17g\nsilhouette %.17g\ndbi %.17g\n", accuracy_pct, nmi,
                silhouette, dbi);
  std::string out = buf;
  for (const auto& w : warnings) out += "# warning: " + w + "\n";
  return out;
}

MetricsReport MetricsReport::from_text(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# warning: ", 0) == 0) {
      r.warnings.push_back(line.substr(11));
      continue;
    }
    if (line[0] == '#') continue;
    const auto space = line.find(' ');
    if (space == std::string::npos) throw std::invalid_argument("metrics report: bad line '" + line + "'");
    const std::string key = line.substr(0, space);
    const double value = std::strtod(line.c_str() + space + 1, nullptr);
    if (key == "accuracy_pct") r.accuracy_pct = value;
    else if (key == "nmi") r.nmi = value;
    else if (key == "silhouette") r.silhouette = value;
    else if (key == "dbi") r.dbi = value;
    else continue;
    ++seen;
  }
  if (seen != 4) throw std::invalid_argument("metrics report: expected 4 fields, found " + std::to_string(seen));
  return r;
}

MetricsReport evaluate(const RowMatrix& features, std::span<const int> pred, std::span<const int> truth) {
  check_same_length(pred, truth, "evaluate");
  if (std::size_t(features.rows()) != pred.size())
    throw std::invalid_argument("evaluate: features and labels differ in length");
  MetricsReport r;
  r.accuracy_pct = unsupervised_accuracy(pred, truth);
  r.nmi = nmi(pred, truth);
  std::vector<int> values;
  compact(pred, &values);
  if (values.size() < 2) {
    // Every point in one cluster: silhouette and DBI are undefined.
    r.silhouette = 0.0;
    r.dbi = std::numeric_limits<double>::infinity();
    r.warnings.push_back("single predicted cluster; silhouette set to 0 and dbi to inf");
    return r;
  }
  r.silhouette = silhouette(features, pred);
  r.dbi = davies_bouldin(features, pred, &r.warnings);
  return r;
}

MetricsReport mean(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("mean: no reports");
  MetricsReport m;
  for (const auto& r : reports) {
    m.accuracy_pct += r.accuracy_pct;
    m.nmi += r.nmi;
    m.silhouette += r.silhouette;
    m.dbi += r.dbi;
    m.warnings.insert(m.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  const double k = double(reports.size());
  m.accuracy_pct /= k;
  m.nmi /= k;
  m.silhouette /= k;
  m.dbi /= k;
  return m;
}

}  // namespace uvac::metrics
