#include "specseg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specseg/error.hpp"

namespace specseg {

NormalizedLaplacian::NormalizedLaplacian(const AffinityGraph& g, double eps_degree)
    : adjacency_(g.expand()), degrees_(degree_vector(g)), eps_degree_(eps_degree) {
  if (!(eps_degree > 0.0)) throw ArgumentError("eps_degree must be positive");
  inv_sqrt_degrees_.resize(degrees_.size());
  for (std::size_t i = 0; i < degrees_.size(); ++i)
    inv_sqrt_degrees_[i] = 1.0 / std::sqrt(std::max(degrees_[i], eps_degree_));
}

std::vector<std::vector<std::uint32_t>> NormalizedLaplacian::components() const {
  const std::size_t n = size();
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::vector<std::uint32_t>> out;
  for (std::size_t root = 0; root < n; ++root) {
    if (seen[root] || adjacency_.row_ptr[root] == adjacency_.row_ptr[root + 1]) continue;
    std::vector<std::uint32_t> comp{static_cast<std::uint32_t>(root)};
    seen[root] = 1;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      const auto i = comp[head];
      for (std::size_t p = adjacency_.row_ptr[i]; p < adjacency_.row_ptr[i + 1]; ++p) {
        const auto j = adjacency_.cols[p];
        if (!seen[j]) {
          seen[j] = 1;
          comp.push_back(j);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

void NormalizedLaplacian::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = size();
  if (x.size() != n || y.size() != n)
    throw ArgumentError("Laplacian apply: vector length mismatch");
  const auto& isd = inv_sqrt_degrees_;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t p = adjacency_.row_ptr[i]; p < adjacency_.row_ptr[i + 1]; ++p) {
      const auto j = adjacency_.cols[p];
      acc += adjacency_.values[p] * isd[j] * x[j];
    }
    y[i] = x[i] - isd[i] * acc;
  }
}

Eigen::VectorXd NormalizedLaplacian::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(x.size());
  apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
        std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
  return y;
}

Eigen::MatrixXd NormalizedLaplacian::to_dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t p = adjacency_.row_ptr[i]; p < adjacency_.row_ptr[i + 1]; ++p) {
      const auto j = adjacency_.cols[p];
      L(i, j) = -inv_sqrt_degrees_[i] * adjacency_.values[p] * inv_sqrt_degrees_[j];
    }
  return L;
}

NormalizedLaplacian build_laplacian(const AffinityGraph& g, double eps_degree) {
  return NormalizedLaplacian(g, eps_degree);
}

EigenBasis::EigenBasis(Eigen::VectorXd values, Eigen::MatrixXd vectors,
                       std::vector<double> residual_norms)
    : values_(std::move(values)),
      vectors_(std::move(vectors)),
      residuals_(std::move(residual_norms)) {
  if (vectors_.cols() != values_.size() ||
      residuals_.size() != static_cast<std::size_t>(values_.size()))
    throw ArgumentError("eigen basis: value, vector and residual counts differ");
  for (Eigen::Index i = 1; i < values_.size(); ++i)
    if (values_[i] < values_[i - 1])
      throw ArgumentError("eigen basis: eigenvalues must be non-decreasing");
}

void canonicalize_sign(std::span<double> v) {
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]);
    if (mag > best_mag) {
      best_mag = mag;
      best = i;
    }
  }
  if (!v.empty() && v[best] < 0.0)
    for (double& x : v) x = -x;
}

double residual_norm(const NormalizedLaplacian& L, std::span<const double> v,
                     double lambda) {
  std::vector<double> lv(v.size());
  L.apply(v, lv);
  double r2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = lv[i] - lambda * v[i];
    r2 += r * r;
  }
  return std::sqrt(r2);
}

namespace {

void check_count(const NormalizedLaplacian& L, std::size_t m) {
  if (m < 2 || m > L.size())
    throw ArgumentError("eigenpair count m=" + std::to_string(m) +
                        " must satisfy 2 <= m <= " + std::to_string(L.size()));
}

}  // namespace

EigenBasis smallest_eigenpairs_dense(const NormalizedLaplacian& L, std::size_t m,
                                     const EigenSolverOptions& opts) {
  check_count(L, m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.to_dense());
  if (es.info() != Eigen::Success)
    throw SolverError("dense symmetric eigensolver failed", {});

  const auto mm = static_cast<Eigen::Index>(m);
  Eigen::VectorXd values = es.eigenvalues().head(mm);
  Eigen::MatrixXd vectors = es.eigenvectors().leftCols(mm);
  std::vector<double> residuals(m);
  for (Eigen::Index c = 0; c < mm; ++c) {
    std::span<double> col(vectors.col(c).data(), L.size());
    canonicalize_sign(col);
    residuals[c] = residual_norm(L, col, values[c]);
  }
  for (double r : residuals)
    if (!(r <= opts.tol))
      throw SolverError("dense eigenpairs exceed residual tolerance", residuals);
  return EigenBasis(std::move(values), std::move(vectors), std::move(residuals));
}

EigenBasis smallest_eigenpairs(const NormalizedLaplacian& L, std::size_t m,
                               const EigenSolverOptions& opts) {
  if (L.size() <= opts.dense_threshold) return smallest_eigenpairs_dense(L, m, opts);
  return smallest_eigenpairs_lanczos(L, m, opts);
}

Bipartition::Bipartition(std::vector<std::uint8_t> in_a) : in_a_(std::move(in_a)) {
  std::size_t a = 0;
  for (auto f : in_a_) a += f != 0;
  if (a == 0 || a == in_a_.size())
    throw ArgumentError("bipartition sides must both be non-empty");
}

std::vector<std::size_t> Bipartition::side_a() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < in_a_.size(); ++i)
    if (in_a_[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> Bipartition::side_b() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < in_a_.size(); ++i)
    if (!in_a_[i]) out.push_back(i);
  return out;
}

double ncut_cost(const AffinityGraph& g, const Bipartition& p) {
  if (p.size() != g.num_nodes())
    throw ArgumentError("bipartition size does not match graph");
  double cut = 0.0, assoc_a = 0.0, assoc_b = 0.0;
  for (const auto& e : g.edges()) {
    const bool a_i = p.in_a(e.i), a_j = p.in_a(e.j);
    // Each undirected edge contributes to both endpoints' row sums.
    (a_i ? assoc_a : assoc_b) += e.weight;
    (a_j ? assoc_a : assoc_b) += e.weight;
    if (a_i != a_j) cut += e.weight;
  }
  if (!(assoc_a > 0.0) || !(assoc_b > 0.0))
    throw DegeneratePartitionError("a side of the bipartition has zero association");
  return cut / assoc_a + cut / assoc_b;
}

}  // namespace specseg
