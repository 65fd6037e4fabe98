#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "specseg/affinity.hpp"

namespace specseg {

inline constexpr double kDefaultEpsDegree = 1e-12;
inline constexpr double kDefaultEigTol = 1e-6;

/// Matrix-free L = I - D^{-1/2} W D^{-1/2} with degrees guarded by
/// max(deg_i, eps_degree). Coordinates with no incident edges are fixed
/// points: (Lx)_i = x_i.
class NormalizedLaplacian {
 public:
  NormalizedLaplacian(const AffinityGraph& g, double eps_degree = kDefaultEpsDegree);

  std::size_t size() const { return inv_sqrt_degrees_.size(); }
  double epsilon_degree() const { return eps_degree_; }
  const std::vector<double>& inv_sqrt_degrees() const { return inv_sqrt_degrees_; }
  const std::vector<double>& degrees() const { return degrees_; }

  /// y = L x. Row-parallel with no cross-row reduction, so it is
  /// deterministic for any split.
  void apply(std::span<const double> x, std::span<double> y) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd to_dense() const;

  /// Connected components with at least one edge, each sorted, ordered by
  /// smallest node. D^{1/2} 1_C spans the null space of L.
  std::vector<std::vector<std::uint32_t>> components() const;

 private:
  SymmetricCsr adjacency_;
  std::vector<double> degrees_;
  std::vector<double> inv_sqrt_degrees_;
  double eps_degree_;
};

NormalizedLaplacian build_laplacian(const AffinityGraph& g,
                                    double eps_degree = kDefaultEpsDegree);

/// The m smallest eigenpairs of L, ascending. Columns of `vectors` are unit
/// norm and sign-canonical (largest-magnitude coordinate positive, lowest
/// index on ties).
class EigenBasis {
 public:
  EigenBasis() = default;
  /// Throws ArgumentError when eigenvalues are not non-decreasing or the
  /// shapes disagree.
  EigenBasis(Eigen::VectorXd values, Eigen::MatrixXd vectors,
             std::vector<double> residual_norms);

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  std::size_t num_nodes() const { return static_cast<std::size_t>(vectors_.rows()); }
  const Eigen::VectorXd& eigenvalues() const { return values_; }
  const Eigen::MatrixXd& eigenvectors() const { return vectors_; }
  const std::vector<double>& residual_norms() const { return residuals_; }

  /// Column i (0-based: 0 is the smallest eigenvalue).
  std::span<const double> vector(std::size_t i) const {
    return {vectors_.col(static_cast<Eigen::Index>(i)).data(), num_nodes()};
  }

 private:
  Eigen::VectorXd values_;
  Eigen::MatrixXd vectors_;
  std::vector<double> residuals_;
};

struct EigenSolverOptions {
  double tol = kDefaultEigTol;
  std::uint64_t seed = 0;
  /// Graphs at or below this many nodes use the dense solver.
  std::size_t dense_threshold = 2000;
  /// Lanczos matvec budget is budget_per_pair * m.
  std::size_t budget_per_pair = 50;
};

EigenBasis smallest_eigenpairs(const NormalizedLaplacian& L, std::size_t m,
                               const EigenSolverOptions& opts = {});

/// Lanczos path forced regardless of size. Exposed for testing.
EigenBasis smallest_eigenpairs_lanczos(const NormalizedLaplacian& L,
                                       std::size_t m,
                                       const EigenSolverOptions& opts = {});
/// Dense path forced regardless of size.
EigenBasis smallest_eigenpairs_dense(const NormalizedLaplacian& L, std::size_t m,
                                     const EigenSolverOptions& opts = {});

/// Flip v in place so the largest-|v_i| coordinate is positive.
void canonicalize_sign(std::span<double> v);

/// ||L v - lambda v||_2
double residual_norm(const NormalizedLaplacian& L, std::span<const double> v,
                     double lambda);

/// Two-sided node split. Membership 1 marks side A.
class Bipartition {
 public:
  /// Throws ArgumentError if either side is empty.
  explicit Bipartition(std::vector<std::uint8_t> in_a);

  std::size_t size() const { return in_a_.size(); }
  bool in_a(std::size_t i) const { return in_a_[i] != 0; }
  std::vector<std::size_t> side_a() const;
  std::vector<std::size_t> side_b() const;

 private:
  std::vector<std::uint8_t> in_a_;
};

/// cut(A,B)/assoc(A,V) + cut(A,B)/assoc(B,V). Throws
/// DegeneratePartitionError when either association is zero.
double ncut_cost(const AffinityGraph& g, const Bipartition& p);

}  // namespace specseg
