#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "uvac/metrics.hpp"

using namespace uvac;
namespace T = uvac::testing;

namespace {

RowMatrix random_points(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

Labels random_labels(std::mt19937_64& rng, int n, int k) {
  std::uniform_int_distribution<int> u(0, k - 1);
  Labels l(n);
  for (auto& v : l) v = u(rng);
  return l;
}

}  // namespace

TEST_CASE("hungarian matches exhaustive search") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_int_distribution<int> small(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 6;
    RowMatrix c(n, n);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = trial % 2 ? u(rng) : double(small(rng));
    const auto a = metrics::hungarian(c);
    std::vector<int> seen(n, 0);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      seen[a.row_to_col[i]]++;
      sum += c(i, a.row_to_col[i]);
    }
    CHECK(std::count(seen.begin(), seen.end(), 1) == n);
    CHECK(sum == a.cost);
    CHECK(a.cost == doctest::Approx(T::brute_force_assignment(c)).epsilon(1e-12));
  }
}

TEST_CASE("hungarian rejects bad input") {
  CHECK_THROWS_AS(metrics::hungarian(RowMatrix::Zero(2, 3)), std::invalid_argument);
  RowMatrix c = RowMatrix::Zero(2, 2);
  c(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(metrics::hungarian(c), std::invalid_argument);
  CHECK(metrics::hungarian(RowMatrix(0, 0)).row_to_col.empty());
}

TEST_CASE("unsupervised accuracy equals the best relabeling") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5 + trial % 30;
    const auto truth = random_labels(rng, n, 1 + trial % 5);
    const auto pred = random_labels(rng, n, 1 + (trial / 5) % 5);
    CHECK(metrics::unsupervised_accuracy(pred, truth) == doctest::Approx(T::brute_force_accuracy(pred, truth)));
  }
}

TEST_CASE("accuracy and NMI of a permuted labeling are perfect") {
  const Labels truth{0, 0, 1, 1, 2, 2, 3};
  const Labels pred{7, 7, 2, 2, 9, 9, 0};
  CHECK(metrics::unsupervised_accuracy(pred, truth) == 100.0);
  CHECK(metrics::nmi(pred, truth) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics::nmi(pred, truth, metrics::NmiNormalization::Geometric) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("NMI matches its definition") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + trial % 40;
    const auto a = random_labels(rng, n, 1 + trial % 6);
    const auto b = random_labels(rng, n, 1 + (trial / 6) % 6);
    CHECK(std::abs(metrics::nmi(a, b) - T::direct_nmi(a, b)) < 1e-9);
    CHECK(std::abs(metrics::nmi(a, b, metrics::NmiNormalization::Geometric) - T::direct_nmi(a, b, true)) < 1e-9);
    CHECK(metrics::nmi(a, b) >= 0.0);
    CHECK(metrics::nmi(a, b) <= 1.0);
  }
}

TEST_CASE("NMI degenerate partitions") {
  const Labels one{0, 0, 0, 0};
  const Labels two{0, 1, 0, 1};
  CHECK(metrics::nmi(one, one) == 1.0);
  CHECK(metrics::nmi(one, two) == 0.0);
  CHECK_THROWS(metrics::nmi(one, Labels{0, 1}));
}

TEST_CASE("silhouette and Davies-Bouldin match direct definitions") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 6 + trial % 25;
    const int k = 2 + trial % 4;
    const auto x = random_points(rng, n, 1 + trial % 4);
    auto labels = random_labels(rng, n, k);
    labels[0] = 0;
    labels[1] = 1;
    CHECK(std::abs(metrics::silhouette(x, labels) - T::direct_silhouette(x, labels)) < 1e-9);
    CHECK(std::abs(metrics::davies_bouldin(x, labels) - T::direct_dbi(x, labels)) < 1e-9);
  }
}

TEST_CASE("well separated clusters score near the ideal") {
  RowMatrix x(6, 1);
  x << 0.0, 0.1, 0.2, 100.0, 100.1, 100.2;
  const Labels l{0, 0, 0, 1, 1, 1};
  CHECK(metrics::silhouette(x, l) > 0.99);
  CHECK(metrics::davies_bouldin(x, l) < 0.01);
}

TEST_CASE("geometric metrics reject degenerate inputs") {
  const RowMatrix x = RowMatrix::Random(4, 2);
  CHECK_THROWS(metrics::silhouette(x, Labels{0, 0, 0, 0}));
  CHECK_THROWS(metrics::silhouette(x.topRows(2), Labels{0, 1}));
  std::vector<std::string> warnings;
  RowMatrix same(4, 1);
  same << 1.0, 1.0, 1.0, 1.0;
  CHECK(std::isinf(metrics::davies_bouldin(same, Labels{0, 0, 1, 1}, &warnings)));
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("metrics report text round trip") {
  metrics::MetricsReport r;
  r.accuracy_pct = 70.78;
  r.nmi = 0.71;
  r.silhouette = -0.04;
  r.dbi = 1.0 / 3.0;
  r.warnings = {"something odd"};
  const auto text = r.to_text();
  CHECK(text.find("accuracy_pct ") != std::string::npos);
  const auto back = metrics::MetricsReport::from_text(text);
  CHECK(back.accuracy_pct == r.accuracy_pct);
  CHECK(back.nmi == r.nmi);
  CHECK(back.silhouette == r.silhouette);
  CHECK(back.dbi == r.dbi);
  CHECK(back.warnings == r.warnings);
  CHECK_THROWS(metrics::MetricsReport::from_text("nmi 0.5\n"));
}

TEST_CASE("evaluate and mean") {
  std::mt19937_64 rng(5);
  const auto x = random_points(rng, 40, 3);
  const auto truth = random_labels(rng, 40, 4);
  const auto a = metrics::evaluate(x, truth, truth);
  CHECK(a.accuracy_pct == 100.0);
  CHECK(a.nmi == doctest::Approx(1.0));
  CHECK(a.silhouette == doctest::Approx(T::direct_silhouette(x, truth)));
  const auto single = metrics::evaluate(x, Labels(40, 0), truth);
  CHECK(single.silhouette == 0.0);
  CHECK(std::isinf(single.dbi));
  CHECK_FALSE(single.warnings.empty());
  metrics::MetricsReport b = a;
  b.accuracy_pct = 50.0;
  const std::vector<metrics::MetricsReport> both{a, b};
  CHECK(metrics::mean(both).accuracy_pct == 75.0);
}
