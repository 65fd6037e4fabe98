#include "specseg/affinity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "specseg/error.hpp"

namespace specseg {

namespace {

constexpr std::size_t kRowBlock = 32;

// Fixed summation order so results never depend on alignment or threading.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

AffinityGraph::AffinityGraph(std::size_t num_nodes, std::vector<Edge> edges,
                             std::uint32_t grid_height, std::uint32_t grid_width)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      grid_height_(grid_height),
      grid_width_(grid_width) {
  if (grid_height_ != 0 || grid_width_ != 0) {
    if (std::size_t{grid_height_} * grid_width_ != num_nodes_)
      throw ArgumentError("grid shape does not match node count");
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& ed = edges_[e];
    if (ed.i >= ed.j || ed.j >= num_nodes_)
      throw ArgumentError("edge must satisfy i < j < num_nodes");
    if (!(ed.weight > 0.0) || ed.weight > 1.0 + 1e-7)
      throw ArgumentError("edge weight must lie in (0, 1]");
    if (e > 0) {
      const auto& prev = edges_[e - 1];
      if (prev.i > ed.i || (prev.i == ed.i && prev.j >= ed.j))
        throw ArgumentError("edges must be sorted by (i, j) without duplicates");
    }
  }
}

double AffinityGraph::density() const {
  if (num_nodes_ < 2) return 0.0;
  const double pairs = 0.5 * static_cast<double>(num_nodes_) *
                       static_cast<double>(num_nodes_ - 1);
  return static_cast<double>(edges_.size()) / pairs;
}

SymmetricCsr AffinityGraph::expand() const {
  SymmetricCsr csr;
  csr.row_ptr.assign(num_nodes_ + 1, 0);
  for (const auto& e : edges_) {
    ++csr.row_ptr[e.i + 1];
    ++csr.row_ptr[e.j + 1];
  }
  for (std::size_t r = 0; r < num_nodes_; ++r) csr.row_ptr[r + 1] += csr.row_ptr[r];
  csr.cols.resize(csr.row_ptr.back());
  csr.values.resize(csr.row_ptr.back());
  std::vector<std::size_t> fill(csr.row_ptr.begin(), csr.row_ptr.end() - 1);
  // Edges are sorted by (i, j). Lower-triangle entries of row j arrive in
  // increasing i, upper-triangle entries of row i in increasing j; the lower
  // ones must precede, so place them in a first pass.
  for (const auto& e : edges_) {
    csr.cols[fill[e.j]] = e.i;
    csr.values[fill[e.j]++] = e.weight;
  }
  for (const auto& e : edges_) {
    csr.cols[fill[e.i]] = e.j;
    csr.values[fill[e.i]++] = e.weight;
  }
  return csr;
}

AffinityGraph build_affinity(const FeatureMap& fm, unsigned workers) {
  fm.validate();
  const std::size_t s = fm.num_pixels();
  const std::size_t d = fm.channels;

  std::vector<double> unit(s * d);
  for (std::size_t i = 0; i < s; ++i) {
    const auto f = fm.pixel(i);
    double norm2 = 0.0;
    for (float x : f) norm2 += double{x} * double{x};
    if (!(norm2 > 0.0))
      throw DegenerateFeatureError(
          i, "zero-norm feature vector at pixel " + std::to_string(i));
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t k = 0; k < d; ++k) unit[i * d + k] = double{f[k]} * inv;
  }

  const std::size_t num_blocks = (s + kRowBlock - 1) / kRowBlock;
  std::vector<std::vector<Edge>> blocks(num_blocks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b; (b = next.fetch_add(1)) < num_blocks;) {
      auto& out = blocks[b];
      const std::size_t r1 = std::min(s, (b + 1) * kRowBlock);
      for (std::size_t i = b * kRowBlock; i < r1; ++i) {
        for (std::size_t j = i + 1; j < s; ++j) {
          const double c = dot(&unit[i * d], &unit[j * d], d);
          if (c > 0.0)
            out.push_back({static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(j), std::min(c, 1.0)});
        }
      }
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, num_blocks));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  }

  std::size_t total = 0;
  for (const auto& b : blocks) total += b.size();
  std::vector<Edge> edges;
  edges.reserve(total);
  for (auto& b : blocks) edges.insert(edges.end(), b.begin(), b.end());
  return AffinityGraph(s, std::move(edges), fm.height, fm.width);
}

std::vector<double> degree_vector(const AffinityGraph& g) {
  std::vector<double> deg(g.num_nodes(), 0.0);
  for (const auto& e : g.edges()) {
    deg[e.i] += e.weight;
    deg[e.j] += e.weight;
  }
  return deg;
}

}  // namespace specseg
