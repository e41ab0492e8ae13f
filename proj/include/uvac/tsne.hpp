#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvac/common.hpp"

namespace uvac::viz {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iters = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
};

struct TsneResult {
  RowMatrix coords;  // n x 2
  std::vector<std::string> warnings;
};

/// Exact (O(n^2)) t-SNE to two dimensions. Requires at least 10 points.
TsneResult tsne(const RowMatrix& features, const TsneOptions& options = {});

/// Scatter plot with one color per label and a legend.
void write_scatter_svg(const std::string& path, const RowMatrix& coords, const Labels& labels,
                       const std::string& title);

/// "x y label" per line.
void write_coordinates(const std::string& path, const RowMatrix& coords, const Labels& labels);

}  // namespace uvac::viz
