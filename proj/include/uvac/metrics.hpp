#pragma once

#include <span>
#include <string>
#include <vector>

#include "uvac/common.hpp"

namespace uvac::metrics {

struct Assignment {
  std::vector<int> row_to_col;  // permutation: row i is matched to column row_to_col[i]
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square matrix (Kuhn-Munkres, O(n^3)).
Assignment hungarian(const RowMatrix& cost);

/// counts(p, t) = number of points with predicted cluster p and true class t.
/// Labels are compacted to 0..K-1 in ascending order of their values.
struct ContingencyTable {
  std::vector<int> pred_values;
  std::vector<int> truth_values;
  Eigen::MatrixXd counts;
  std::size_t total = 0;
};

ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth);

/// Best one-to-one relabeling accuracy, in percent.
double unsupervised_accuracy(std::span<const int> pred, std::span<const int> truth);

enum class NmiNormalization { Arithmetic, Geometric };

double nmi(std::span<const int> pred, std::span<const int> truth,
           NmiNormalization normalization = NmiNormalization::Arithmetic);

/// Mean silhouette with Euclidean distance. Singleton clusters score 0.
double silhouette(const RowMatrix& features, std::span<const int> labels);

/// Davies-Bouldin index. Coincident centroids give +inf and a message in `warnings`.
double davies_bouldin(const RowMatrix& features, std::span<const int> labels,
                      std::vector<std::string>* warnings = nullptr);

struct MetricsReport {
  double accuracy_pct = 0.0;
  double nmi = 0.0;
  double silhouette = 0.0;
  double dbi = 0.0;
  std::vector<std::string> warnings;

  /// "key value" lines with fields accuracy_pct, nmi, silhouette, dbi.
  std::string to_text() const;
  static MetricsReport from_text(const std::string& text);
};

MetricsReport evaluate(const RowMatrix& features, std::span<const int> pred,
                       std::span<const int> truth);

/// Element-wise mean of several reports (warnings concatenated).
MetricsReport mean(std::span<const MetricsReport> reports);

}  // namespace uvac::metrics
