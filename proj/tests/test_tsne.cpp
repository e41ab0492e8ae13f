#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "support/synthetic.hpp"
#include "uvac/tsne.hpp"

using namespace uvac;

namespace {

std::pair<RowMatrix, Labels> three_blobs(int per, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  RowMatrix x(3 * per, 5);
  Labels l;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per; ++i) {
      for (int j = 0; j < 5; ++j) x(c * per + i, j) = (j == c ? 10.0 : 0.0) + g(rng);
      l.push_back(c);
    }
  return {x, l};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("t-SNE keeps separated clusters apart") {
  const auto [x, labels] = three_blobs(20, 1);
  viz::TsneOptions opt;
  opt.perplexity = 10;
  opt.iterations = 400;
  const auto r = viz::tsne(x, opt);
  REQUIRE(r.coords.rows() == 60);
  REQUIRE(r.coords.cols() == 2);
  CHECK(r.coords.allFinite());
  CHECK(r.warnings.empty());
  // Nearest embedded neighbour shares the cluster for nearly every point.
  int agree = 0;
  for (Eigen::Index i = 0; i < 60; ++i) {
    Eigen::Index best = -1;
    double bd = 1e300;
    for (Eigen::Index j = 0; j < 60; ++j) {
      if (i == j) continue;
      const double d = (r.coords.row(i) - r.coords.row(j)).squaredNorm();
      if (d < bd) bd = d, best = j;
    }
    agree += labels[std::size_t(i)] == labels[std::size_t(best)];
  }
  CHECK(agree >= 57);
}

TEST_CASE("t-SNE is seeded") {
  const auto [x, labels] = three_blobs(5, 2);
  viz::TsneOptions opt;
  opt.perplexity = 4;
  opt.iterations = 100;
  opt.seed = 3;
  CHECK(viz::tsne(x, opt).coords == viz::tsne(x, opt).coords);
  auto other = opt;
  other.seed = 4;
  CHECK(viz::tsne(x, other).coords != viz::tsne(x, opt).coords);
}

TEST_CASE("t-SNE degenerate inputs") {
  CHECK_THROWS_AS(viz::tsne(RowMatrix::Random(9, 3)), std::invalid_argument);
  viz::TsneOptions opt;
  opt.perplexity = 3;
  opt.iterations = 50;
  const auto r = viz::tsne(RowMatrix::Ones(12, 3), opt);
  CHECK(r.coords.allFinite());
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("scatter image and coordinate file") {
  uvac::testing::TempDir dir("plot");
  RowMatrix c(3, 2);
  c << 0, 0, 1, 2, -1, 0.5;
  const Labels l{0, 1, 1};
  viz::write_scatter_svg((dir / "p.svg").string(), c, l, "demo");
  viz::write_coordinates((dir / "p.txt").string(), c, l);
  const auto svg = slurp(dir / "p.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("cluster 0") != std::string::npos);
  CHECK(svg.find("cluster 1") != std::string::npos);
  CHECK(svg.find("demo") != std::string::npos);
  std::istringstream coords(slurp(dir / "p.txt"));
  double x, y;
  int label, rows = 0;
  while (coords >> x >> y >> label) {
    CHECK(x == c(rows, 0));
    CHECK(label == l[std::size_t(rows)]);
    ++rows;
  }
  CHECK(rows == 3);
  CHECK_THROWS(viz::write_scatter_svg((dir / "q.svg").string(), c, Labels{0}, "bad"));
}
