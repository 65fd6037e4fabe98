// Lanczos with full reorthogonalization on B = 2I - L. The spectrum of L
// lies in [0, 2], so the largest eigenpairs of B are the smallest of L and
// no shift-invert factorization is needed.
//
// Converged Ritz pairs are locked and later rounds run in the orthogonal
// complement of the locked set. Once m pairs are locked, one more round
// from a fresh start vector checks that the complement holds nothing
// smaller; a single Krylov space sees only one direction per eigenspace, so
// without this round repeated eigenvalues (disconnected components,
// isolated nodes) would be silently skipped.
//
// The matvec budget covers converging the wanted pairs. Verification rounds
// draw on a separate allowance of the same size.
//
// The null space is known in closed form, one D^{1/2} 1_C per component, so
// it is locked up front and costs no matvecs.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "specseg/error.hpp"
#include "specseg/random.hpp"
#include "specseg/spectral.hpp"

namespace specseg {

namespace {

struct RitzPair {
  double theta;  // eigenvalue of B
  Eigen::VectorXd x;
};

struct RoundResult {
  std::vector<RitzPair> converged;  // leading pairs, theta descending
  std::vector<double> estimates;    // residual estimates of the wanted pairs
  bool exhausted = false;
};

class LanczosSolver {
 public:
  LanczosSolver(const NormalizedLaplacian& L, const EigenSolverOptions& opts,
                std::size_t budget)
      : L_(L),
        n_(L.size()),
        tol_(opts.tol),
        budget_(budget),
        rng_(mix_seed(opts.seed, 0)),
        locked_(static_cast<Eigen::Index>(n_), 0) {}

  EigenBasis solve(std::size_t m) {
    lock_null_space();
    std::vector<double> last_estimates;
    for (;;) {
      const bool verifying = lambdas_.size() >= m;
      if (lambdas_.size() == n_) break;
      // L is PSD, so nothing can hide below a zero m-th value.
      if (verifying && mth_smallest(m) <= tol_) break;
      const std::size_t want = verifying ? 1 : m - lambdas_.size();

      counter_ = verifying ? &verify_used_ : &used_;
      RoundResult r = run_round(want);
      last_estimates = r.estimates;

      std::size_t newly_locked = 0;
      for (auto& p : r.converged) {
        if (verifying) {
          const double lambda = rayleigh(p.x);
          if (lambda >= mth_smallest(m) - tol_) return finish(m);
        }
        if (try_lock(p.x)) ++newly_locked;
      }
      if (newly_locked == 0 && r.exhausted)
        throw SolverError(std::string(verifying ? "Lanczos verification did not converge"
                                                : "Lanczos did not converge") +
                              " within " + std::to_string(budget_) + " matvecs",
                          last_estimates);
    }
    return finish(m);
  }

 private:
  Eigen::VectorXd apply_b(const Eigen::VectorXd& x) {
    ++*counter_;
    return 2.0 * x - L_.apply(x);
  }

  void orthogonalize_locked(Eigen::VectorXd& w) const {
    if (locked_.cols() == 0) return;
    w -= locked_ * (locked_.transpose() * w);
  }

  double rayleigh(const Eigen::VectorXd& x) const { return x.dot(L_.apply(x)); }

  double mth_smallest(std::size_t m) const {
    std::vector<double> sorted = lambdas_;
    std::nth_element(sorted.begin(), sorted.begin() + (m - 1), sorted.end());
    return sorted[m - 1];
  }

  Eigen::VectorXd random_start() {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(n_));
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 2.0 * uniform01(rng_) - 1.0;
      orthogonalize_locked(v);
      orthogonalize_locked(v);
      const double nrm = v.norm();
      if (nrm > 1e-8) return v / nrm;
    }
    throw SolverError("could not draw a start vector outside the locked subspace", {});
  }

  void lock_null_space() {
    const auto& deg = L_.degrees();
    for (const auto& comp : L_.components()) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
      for (const auto i : comp) x[i] = std::sqrt(deg[i]);
      try_lock(x / x.norm());
    }
  }

  bool try_lock(Eigen::VectorXd x) {
    orthogonalize_locked(x);
    const double nrm = x.norm();
    if (!(nrm > 0.5)) return false;
    x /= nrm;
    const double lambda = rayleigh(x);
    if (!(residual_norm(L_, {x.data(), n_}, lambda) <= tol_)) return false;
    const Eigen::Index c = locked_.cols();
    locked_.conservativeResize(Eigen::NoChange, c + 1);
    locked_.col(c) = x;
    lambdas_.push_back(lambda);
    return true;
  }

  RoundResult run_round(std::size_t want) {
    RoundResult out;
    const std::size_t dim_cap = n_ - static_cast<std::size_t>(locked_.cols());
    const std::size_t room = budget_ > *counter_ ? budget_ - *counter_ : 0;
    if (room == 0) {
      out.exhausted = true;
      return out;
    }
    const auto max_dim = static_cast<Eigen::Index>(std::min(dim_cap, room));
    const auto nn = static_cast<Eigen::Index>(n_);

    Eigen::MatrixXd V(nn, max_dim);
    std::vector<double> alpha, beta;
    V.col(0) = random_start();
    std::size_t next_check = std::min<std::size_t>(want + 4, max_dim);

    for (Eigen::Index k = 0;; ++k) {
      Eigen::VectorXd w = apply_b(V.col(k));
      const double a = V.col(k).dot(w);
      alpha.push_back(a);
      w -= a * V.col(k);
      if (k > 0) w -= beta[k - 1] * V.col(k - 1);
      for (int pass = 0; pass < 2; ++pass) {
        orthogonalize_locked(w);
        const auto Vk = V.leftCols(k + 1);
        w -= Vk * (Vk.transpose() * w);
      }
      const double b = w.norm();
      beta.push_back(b);

      const auto dim = static_cast<std::size_t>(k + 1);
      const bool invariant = b < 1e-10 || dim == dim_cap;
      const bool full = static_cast<Eigen::Index>(dim) == max_dim;
      if (invariant || full || dim >= next_check) {
        Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), k + 1);
        Eigen::VectorXd sub = k > 0 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), k))
                                    : Eigen::VectorXd();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        const auto& theta = tri.eigenvalues();  // ascending
        const auto& Y = tri.eigenvectors();

        const std::size_t take = std::min(want, dim);
        std::size_t leading = 0;
        out.estimates.assign(take, 0.0);
        for (std::size_t t = 0; t < take; ++t) {
          const Eigen::Index c = k - static_cast<Eigen::Index>(t);
          out.estimates[t] = invariant ? 0.0 : std::abs(b * Y(k, c));
          if (leading == t && out.estimates[t] <= 0.5 * tol_) ++leading;
        }
        if (leading == want || invariant || full) {
          for (std::size_t t = 0; t < leading; ++t) {
            const Eigen::Index c = k - static_cast<Eigen::Index>(t);
            out.converged.push_back({theta[c], V.leftCols(k + 1) * Y.col(c)});
          }
          out.exhausted = full && !invariant && leading < want;
          return out;
        }
        next_check = dim + std::max<std::size_t>(1, dim / 20);
        next_check = std::min<std::size_t>(next_check, max_dim);
      }
      V.col(k + 1) = w / b;
    }
  }

  EigenBasis finish(std::size_t m) {
    std::vector<std::size_t> order(lambdas_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lambdas_[a] < lambdas_[b]; });

    const auto mm = static_cast<Eigen::Index>(m);
    Eigen::VectorXd values(mm);
    Eigen::MatrixXd vectors(static_cast<Eigen::Index>(n_), mm);
    std::vector<double> residuals(m);
    for (Eigen::Index c = 0; c < mm; ++c) {
      vectors.col(c) = locked_.col(static_cast<Eigen::Index>(order[c]));
      values[c] = lambdas_[order[c]];
      std::span<double> col(vectors.col(c).data(), n_);
      canonicalize_sign(col);
      residuals[c] = residual_norm(L_, col, values[c]);
    }
    return EigenBasis(std::move(values), std::move(vectors), std::move(residuals));
  }

  const NormalizedLaplacian& L_;
  std::size_t n_;
  double tol_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::size_t verify_used_ = 0;
  std::size_t* counter_ = &used_;
  std::mt19937_64 rng_;
  Eigen::MatrixXd locked_;
  std::vector<double> lambdas_;
};

}  // namespace

EigenBasis smallest_eigenpairs_lanczos(const NormalizedLaplacian& L, std::size_t m,
                                       const EigenSolverOptions& opts) {
  if (m < 2 || m > L.size())
    throw ArgumentError("eigenpair count m=" + std::to_string(m) +
                        " must satisfy 2 <= m <= " + std::to_string(L.size()));
  LanczosSolver solver(L, opts, opts.budget_per_pair * m);
  return solver.solve(m);
}

}  // namespace specseg
