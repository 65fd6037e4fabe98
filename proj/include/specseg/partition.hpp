#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "specseg/spectral.hpp"
#include "specseg/tensor_io.hpp"

namespace specseg {

/// Per-pixel coordinates from the first `dims` eigenvectors, pixel-major:
/// coords[i * dims + c] = v_c[i].
struct SpectralEmbedding {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::size_t dims = 0;
  std::vector<double> coords;

  std::size_t num_points() const { return std::size_t{height} * width; }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(coords).subspan(i * dims, dims);
  }
};

struct ClusterParams {
  std::uint32_t k = 15;
  std::uint32_t g = 15;
  std::uint64_t seed = 0;
  std::uint32_t restarts = 10;
  std::uint32_t max_iters = 300;
  double rel_tol = 1e-6;
};

struct KMeansResult {
  LabelMask labels;  // canonical: first-occurrence order in row-major scan
  double inertia = 0.0;
  std::uint32_t iterations = 0;
};

/// Copy of v oriented so the positive side {v > 0} is the minority against
/// {v < 0}; on a tie the side holding pixel 0 is made positive.
std::vector<double> orient_minority_positive(std::span<const double> v);

/// Min-max normalized oriented Fiedler vector (second column of the basis).
SaliencyMap fiedler_saliency(const EigenBasis& basis, std::uint32_t height,
                             std::uint32_t width);

/// Label 1 where the already-oriented vector exceeds tau, else 0.
LabelMask threshold_mask(std::span<const double> oriented, std::uint32_t height,
                         std::uint32_t width, double tau = 0.0);

LabelMask fiedler_binary_mask(const EigenBasis& basis, std::uint32_t height,
                              std::uint32_t width, double tau = 0.0);

SpectralEmbedding stack_eigenvectors(const EigenBasis& basis, std::size_t g,
                                     std::uint32_t height, std::uint32_t width);

/// Best-inertia k-means over `restarts` runs (k-means++ seeding, Lloyd
/// iterations). Throws InfeasibleError if k exceeds the distinct points.
KMeansResult kmeans_cluster(const SpectralEmbedding& emb, const ClusterParams& p);

/// One restart of the stream kmeans_cluster draws from.
KMeansResult kmeans_restart(const SpectralEmbedding& emb, const ClusterParams& p,
                            std::uint32_t restart);

/// Number of distinct coordinate vectors.
std::size_t count_distinct_points(const SpectralEmbedding& emb);

/// Renumber labels by first occurrence in a row-major scan.
LabelMask canonical_relabel(const LabelMask& mask);

}  // namespace specseg
