#include <doctest.h>

#include <cmath>
#include <random>

#include "specseg/affinity.hpp"
#include "specseg/error.hpp"
#include "support.hpp"

using namespace specseg;

namespace {

FeatureMap map_of(std::uint32_t h, std::uint32_t w, std::uint32_t d, std::vector<float> data) {
  FeatureMap fm;
  fm.height = h;
  fm.width = w;
  fm.channels = d;
  fm.data = std::move(data);
  return fm;
}

FeatureMap random_map(std::mt19937_64& rng, std::uint32_t h, std::uint32_t w, std::uint32_t d) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> data(std::size_t{h} * w * d);
  for (auto& v : data) v = n(rng);
  return map_of(h, w, d, std::move(data));
}

// Plain dense cosine matrix.
double cosine(const FeatureMap& fm, std::size_t i, std::size_t j) {
  double dot = 0, ni = 0, nj = 0;
  for (std::size_t c = 0; c < fm.channels; ++c) {
    const double a = fm.data[i * fm.channels + c], b = fm.data[j * fm.channels + c];
    dot += a * b;
    ni += a * a;
    nj += b * b;
  }
  return dot / std::sqrt(ni * nj);
}

}  // namespace

TEST_CASE("pairwise thresholding") {
  // 2x2 grid; pixels 0 and 1 carry the vectors under test, 2 and 3 are
  // anti-aligned fillers.
  SUBCASE("identical vectors") {
    const auto g = build_affinity(map_of(2, 2, 2, {1, 0, 1, 0, -1, -1, -1, -1}));
    REQUIRE(!g.edges().empty());
    CHECK(g.edges()[0] == Edge{0, 1, 1.0});
  }
  SUBCASE("orthogonal vectors have no edge") {
    const auto g = build_affinity(map_of(2, 2, 2, {1, 0, 0, 1, -1, -1, -1, -1}));
    for (const auto& e : g.edges()) CHECK_FALSE((e.i == 0 && e.j == 1));
  }
  SUBCASE("anti-parallel vectors have no edge") {
    const auto g = build_affinity(map_of(2, 2, 2, {1, 0, -1, 0, 0, 1, 0, 1}));
    for (const auto& e : g.edges()) CHECK_FALSE((e.i == 0 && e.j == 1));
  }
}

TEST_CASE("weights equal the dense cosine oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fm = random_map(rng, 3, 3, 4);
    const auto g = build_affinity(fm);
    const Eigen::MatrixXd W = testsupport::dense_adjacency(g);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) {
        const double expect = i == j ? 0.0 : std::max(0.0, cosine(fm, i, j));
        CHECK(std::abs(W(i, j) - expect) <= 1e-6);
      }
  }
}

TEST_CASE("zero feature vector names the pixel") {
  const auto fm = map_of(2, 2, 2, {1, 0, 1, 1, 0, 0, 1, 2});
  try {
    build_affinity(fm);
    FAIL("expected DegenerateFeatureError");
  } catch (const DegenerateFeatureError& e) {
    CHECK(e.pixel() == 2);
  }
}

TEST_CASE("degrees") {
  SUBCASE("triangle") {
    const AffinityGraph g(3, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}});
    CHECK(degree_vector(g) == std::vector<double>{2, 2, 2});
  }
  SUBCASE("isolated node") {
    const AffinityGraph g(3, {{0, 1, 0.5}});
    CHECK(degree_vector(g) == std::vector<double>{0.5, 0.5, 0});
  }
  SUBCASE("dense row sums") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
      const auto g = testsupport::random_graph(rng, 30, 0.2);
      const auto deg = degree_vector(g);
      const Eigen::MatrixXd W = testsupport::dense_adjacency(g);
      for (Eigen::Index i = 0; i < W.rows(); ++i) CHECK(std::abs(deg[i] - W.row(i).sum()) <= 1e-9);
    }
  }
}

TEST_CASE("scale invariance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int t = 0; t < 10; ++t) {
    auto fm = random_map(rng, 4, 5, 6);
    const auto g = build_affinity(fm);
    // Power-of-two factors keep float products exact.
    auto pow2 = fm;
    for (std::size_t i = 0; i < pow2.num_pixels(); ++i) {
      const float f = std::ldexp(1.0f, static_cast<int>(i % 7) - 3);
      for (std::size_t c = 0; c < fm.channels; ++c) pow2.data[i * fm.channels + c] *= f;
    }
    CHECK(build_affinity(pow2).edges() == g.edges());
    // Arbitrary factors change the float inputs by rounding only.
    auto any = fm;
    for (std::size_t i = 0; i < any.num_pixels(); ++i) {
      const float f = scale(rng);
      for (std::size_t c = 0; c < fm.channels; ++c) any.data[i * fm.channels + c] *= f;
    }
    const auto h = build_affinity(any);
    const Eigen::MatrixXd A = testsupport::dense_adjacency(g), B = testsupport::dense_adjacency(h);
    CHECK((A - B).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("symmetric expansion") {
  std::mt19937_64 rng(9);
  const auto g = build_affinity(random_map(rng, 5, 5, 3));
  const auto csr = g.expand();
  REQUIRE(csr.row_ptr.size() == 26);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(25, 25);
  for (std::size_t r = 0; r < 25; ++r)
    for (std::size_t k = csr.row_ptr[r]; k < csr.row_ptr[r + 1]; ++k) {
      if (k > csr.row_ptr[r]) CHECK(csr.cols[k - 1] < csr.cols[k]);
      W(r, csr.cols[k]) = csr.values[k];
    }
  CHECK(W == W.transpose());
  CHECK(W.diagonal().isZero());
  CHECK(csr.values.size() == 2 * g.edges().size());
}

TEST_CASE("graph invariants") {
  std::mt19937_64 rng(1);
  const auto g = build_affinity(random_map(rng, 6, 6, 5));
  const std::size_t s = 36;
  CHECK(g.edges().size() <= s * (s - 1) / 2);
  CHECK(g.density() == doctest::Approx(double(g.edges().size()) / (s * (s - 1) / 2.0)));
  CHECK(g.grid_height() == 6);
  for (const auto& e : g.edges()) {
    CHECK(e.i < e.j);
    CHECK(e.weight > 0.0);
    CHECK(e.weight <= 1.0 + 1e-7);
  }
  CHECK_THROWS_AS(AffinityGraph(3, {{1, 0, 0.5}}), ArgumentError);
  CHECK_THROWS_AS(AffinityGraph(3, {{0, 1, 0.0}}), ArgumentError);
  CHECK_THROWS_AS(AffinityGraph(3, {{0, 3, 0.5}}), ArgumentError);
  CHECK_THROWS_AS(AffinityGraph(3, {{0, 2, 0.5}, {0, 1, 0.5}}), ArgumentError);
}

TEST_CASE("worker count does not change the graph") {
  std::mt19937_64 rng(21);
  const auto fm = random_map(rng, 12, 11, 7);
  const auto one = build_affinity(fm, 1);
  for (unsigned w : {2u, 3u, 8u}) CHECK(build_affinity(fm, w).edges() == one.edges());
}
