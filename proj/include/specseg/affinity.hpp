#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "specseg/tensor_io.hpp"

namespace specseg {

struct Edge {
  std::uint32_t i = 0;  // i < j
  std::uint32_t j = 0;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

/// Symmetric adjacency in compressed-row form, both triangles present.
struct SymmetricCsr {
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> cols;
  std::vector<double> values;
};

/// Sparse symmetric pixel-affinity graph. Only the strict upper triangle is
/// stored, sorted by (i, j); weights lie in (0, 1].
class AffinityGraph {
 public:
  AffinityGraph() = default;
  /// Validates ordering, bounds, i < j and positive weights.
  AffinityGraph(std::size_t num_nodes, std::vector<Edge> edges,
                std::uint32_t grid_height = 0, std::uint32_t grid_width = 0);

  std::size_t num_nodes() const { return num_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::uint32_t grid_height() const { return grid_height_; }
  std::uint32_t grid_width() const { return grid_width_; }

  /// Stored edges over the s(s-1)/2 possible ones.
  double density() const;

  SymmetricCsr expand() const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::uint32_t grid_height_ = 0;
  std::uint32_t grid_width_ = 0;
};

/// Thresholded cosine-similarity graph: w_ij = cos(f_i, f_j) when i != j and
/// the cosine is strictly positive, absent otherwise. Rows are split across
/// `workers` threads in fixed blocks, so the output does not depend on the
/// worker count. Throws DegenerateFeatureError on a zero-norm feature.
AffinityGraph build_affinity(const FeatureMap& fm, unsigned workers = 1);

/// deg_i = sum_j w_ij.
std::vector<double> degree_vector(const AffinityGraph& g);

}  // namespace specseg
