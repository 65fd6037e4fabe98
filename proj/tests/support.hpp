// Test-only oracles and fixture builders. Nothing here calls into the code
// under test except to construct inputs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "specseg/affinity.hpp"
#include "specseg/tensor_io.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline double unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool connected(std::size_t n, const std::vector<specseg::Edge>& edges) {
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t groups = n;
  for (const auto& e : edges) {
    const auto a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[a] = b;
      --groups;
    }
  }
  return groups == 1;
}

/// Erdos-Renyi style graph with weights in (0, 1].
inline specseg::AffinityGraph random_graph(std::mt19937_64& rng, std::size_t n, double p) {
  std::vector<specseg::Edge> edges;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (unit(rng) < p) edges.push_back({i, j, 1.0 - unit(rng) * 0.999});
  return specseg::AffinityGraph(n, std::move(edges));
}

/// Resamples until the graph is connected.
inline specseg::AffinityGraph random_connected_graph(std::mt19937_64& rng, std::size_t n,
                                                     double p) {
  for (;;) {
    auto g = random_graph(rng, n, p);
    if (connected(n, g.edges())) return g;
  }
}

inline Eigen::MatrixXd dense_adjacency(const specseg::AffinityGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) W(e.i, e.j) = W(e.j, e.i) = e.weight;
  return W;
}

/// I - D^{-1/2} W D^{-1/2} assembled entry by entry; isolated nodes keep a
/// unit diagonal.
inline Eigen::MatrixXd dense_laplacian(const specseg::AffinityGraph& g) {
  const Eigen::MatrixXd W = dense_adjacency(g);
  const auto n = W.rows();
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (W(i, j) == 0.0) continue;
      L(i, j) -= W(i, j) / std::sqrt(W.row(i).sum() * W.row(j).sum());
    }
  return L;
}

struct DenseEigen {
  std::vector<double> values;  // ascending
  Eigen::MatrixXd vectors;     // columns
};

/// Reference symmetric eigendecomposition through LAPACK dsyev.
inline DenseEigen lapack_eigen(const Eigen::MatrixXd& A) {
  const auto n = static_cast<lapack_int>(A.rows());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor> a = A;
  DenseEigen out;
  out.values.resize(static_cast<std::size_t>(n));
  const lapack_int info =
      LAPACKE_dsyev(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, out.values.data());
  if (info != 0) throw std::runtime_error("dsyev failed");
  out.vectors = a;
  return out;
}

/// Sine of the largest principal angle between span(V) and span(Q), where Q
/// has orthonormal columns: max over unit x in span(V) of |(I - QQ^T)x|.
inline double max_principal_angle_sine(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Q) {
  const Eigen::MatrixXd Vo = Eigen::HouseholderQR<Eigen::MatrixXd>(V).householderQ() *
                             Eigen::MatrixXd::Identity(V.rows(), V.cols());
  const Eigen::MatrixXd R = Vo - Q * (Q.transpose() * Vo);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

/// Oracle eigenvectors for the m smallest eigenvalues, extended by any
/// further eigenvalues tied with the m-th within `tie`.
inline Eigen::MatrixXd oracle_subspace(const DenseEigen& e, std::size_t m, double tie) {
  std::size_t cols = m;
  while (cols < e.values.size() && e.values[cols] <= e.values[m - 1] + tie) ++cols;
  return e.vectors.leftCols(static_cast<Eigen::Index>(cols));
}

/// Feature vector for population p: a shared direction plus a population
/// direction, so populations are similar only weakly (cosine near 0.2 at
/// d = 8) and the graph stays connected.
inline std::vector<float> population_feature(std::size_t p, std::size_t d, std::mt19937_64& rng,
                                             double noise) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<float> f(d);
  for (std::size_t c = 0; c < d; ++c) {
    double v = 0.1;
    if (c == 1 + p) v += 1.0;
    v += noise * n01(rng);
    f[c] = static_cast<float>(v);
  }
  return f;
}

/// Synthetic h x w frame: labels[i] picks the population of pixel i.
inline specseg::FeatureMap frame_from_labels(const specseg::LabelMask& labels, std::size_t d,
                                             std::uint64_t seed, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  specseg::FeatureMap fm;
  fm.height = labels.height;
  fm.width = labels.width;
  fm.channels = static_cast<std::uint32_t>(d);
  for (auto l : labels.labels) {
    const auto f = population_feature(l, d, rng, noise);
    fm.data.insert(fm.data.end(), f.begin(), f.end());
  }
  return fm;
}

/// Disc of label 1 on a background of 0.
inline specseg::LabelMask disc_mask(std::uint32_t h, std::uint32_t w, double cy, double cx,
                                    double r) {
  specseg::LabelMask m(h, w, 0);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x)
      if ((y + 0.5 - cy) * (y + 0.5 - cy) + (x + 0.5 - cx) * (x + 0.5 - cx) <= r * r)
        m.labels[std::size_t{y} * w + x] = 1;
  return m;
}

/// Background 0, a disc labeled 1 and a rectangle labeled 2.
inline specseg::LabelMask disc_and_bar_mask(std::uint32_t h, std::uint32_t w) {
  auto m = disc_mask(h, w, h * 0.3, w * 0.3, h * 0.2);
  for (std::uint32_t y = h * 6 / 10; y < h * 9 / 10; ++y)
    for (std::uint32_t x = w * 4 / 10; x < w * 9 / 10; ++x) m.labels[std::size_t{y} * w + x] = 2;
  return m;
}

/// Ground truth at output resolution: each source cell becomes an f x f block.
inline specseg::LabelMask block_upscale(const specseg::LabelMask& m, std::uint32_t f) {
  specseg::LabelMask out(m.height * f, m.width * f, 0);
  for (std::uint32_t y = 0; y < out.height; ++y)
    for (std::uint32_t x = 0; x < out.width; ++x)
      out.labels[std::size_t{y} * out.width + x] = m.at(y / f, x / f);
  return out;
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("specseg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Every regular file under root, relative path mapped to bytes.
inline std::vector<std::pair<std::string, std::vector<std::uint8_t>>> tree_contents(
    const fs::path& root) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out.emplace_back(fs::relative(e.path(), root).string(),
                       specseg::read_file_bytes(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace testsupport
