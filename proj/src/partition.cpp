#include "specseg/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "specseg/error.hpp"
#include "specseg/random.hpp"

namespace specseg {

namespace {

void check_grid(const EigenBasis& basis, std::uint32_t height, std::uint32_t width) {
  if (std::size_t{height} * width != basis.num_nodes())
    throw ShapeError("grid " + std::to_string(height) + "x" + std::to_string(width) +
                     " does not match " + std::to_string(basis.num_nodes()) +
                     " eigenvector entries");
}

std::span<const double> fiedler_vector(const EigenBasis& basis) {
  if (basis.size() < 2)
    throw ArgumentError("Fiedler vector needs at least two eigenvectors");
  return basis.vector(1);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

struct Assignment {
  std::vector<std::uint32_t> label;
  std::vector<double> dist;
  double inertia = 0.0;
};

class Lloyd {
 public:
  Lloyd(const SpectralEmbedding& emb, std::uint32_t k)
      : x_(emb.coords.data()), n_(emb.num_points()), dims_(emb.dims), k_(k),
        centroids_(std::size_t{k} * emb.dims) {}

  void seed_plus_plus(std::mt19937_64& rng) {
    std::vector<double> d2(n_, std::numeric_limits<double>::infinity());
    std::size_t pick = uniform_index(rng, n_);
    for (std::uint32_t c = 0; c < k_; ++c) {
      if (c > 0) {
        double total = 0.0;
        for (double v : d2) total += v;
        const double r = uniform01(rng) * total;
        double acc = 0.0;
        pick = n_;
        std::size_t last_positive = n_;
        for (std::size_t i = 0; i < n_; ++i) {
          if (d2[i] <= 0.0) continue;
          last_positive = i;
          acc += d2[i];
          if (acc > r) {
            pick = i;
            break;
          }
        }
        if (pick == n_) pick = last_positive;
      }
      std::copy_n(x_ + pick * dims_, dims_, &centroids_[c * dims_]);
      for (std::size_t i = 0; i < n_; ++i)
        d2[i] = std::min(d2[i], squared_distance(x_ + i * dims_, &centroids_[c * dims_], dims_));
    }
  }

  Assignment assign() const {
    Assignment a;
    a.label.resize(n_);
    a.dist.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::uint32_t c = 0; c < k_; ++c) {
        const double d = squared_distance(x_ + i * dims_, &centroids_[c * dims_], dims_);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      a.label[i] = arg;
      a.dist[i] = best;
      a.inertia += best;
    }
    return a;
  }

  // Centroids become cluster means; an empty cluster is re-seeded at the
  // point farthest from its assigned centroid.
  void update(Assignment& a) {
    std::vector<std::size_t> count(k_, 0);
    std::fill(centroids_.begin(), centroids_.end(), 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      ++count[a.label[i]];
      double* c = &centroids_[a.label[i] * dims_];
      for (std::size_t d = 0; d < dims_; ++d) c[d] += x_[i * dims_ + d];
    }
    for (std::uint32_t c = 0; c < k_; ++c) {
      if (count[c] > 0) {
        for (std::size_t d = 0; d < dims_; ++d)
          centroids_[c * dims_ + d] /= static_cast<double>(count[c]);
        continue;
      }
      std::size_t far = 0;
      for (std::size_t i = 1; i < n_; ++i)
        if (a.dist[i] > a.dist[far]) far = i;
      std::copy_n(x_ + far * dims_, dims_, &centroids_[c * dims_]);
      a.dist[far] = 0.0;
    }
  }

  void set_means(const std::vector<std::uint32_t>& label) {
    Assignment a;
    a.label = label;
    a.dist.assign(n_, 0.0);
    update(a);
  }

  double sse(const std::vector<std::uint32_t>& label) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      s += squared_distance(x_ + i * dims_, &centroids_[label[i] * dims_], dims_);
    return s;
  }

 private:
  const double* x_;
  std::size_t n_;
  std::size_t dims_;
  std::uint32_t k_;
  std::vector<double> centroids_;
};

void check_params(const SpectralEmbedding& emb, const ClusterParams& p) {
  if (emb.dims == 0 || emb.coords.size() != emb.num_points() * emb.dims)
    throw ArgumentError("embedding coordinate count does not match grid");
  if (p.k == 0 || p.k > 65536) throw ArgumentError("k must lie in [1, 65536]");
  if (p.max_iters == 0 || p.restarts == 0 || !(p.rel_tol > 0.0))
    throw ArgumentError("k-means needs positive restarts, max_iters and rel_tol");
  const std::size_t distinct = count_distinct_points(emb);
  if (p.k > distinct)
    throw InfeasibleError("k=" + std::to_string(p.k) + " exceeds the " +
                          std::to_string(distinct) + " distinct points");
}

KMeansResult run_restart(const SpectralEmbedding& emb, const ClusterParams& p,
                         std::uint32_t restart) {
  std::mt19937_64 rng(mix_seed(p.seed, restart));
  Lloyd lloyd(emb, p.k);
  lloyd.seed_plus_plus(rng);

  Assignment a = lloyd.assign();
  std::uint32_t it = 1;
  for (; it < p.max_iters; ++it) {
    lloyd.update(a);
    Assignment next = lloyd.assign();
    const bool same = next.label == a.label;
    const bool flat = a.inertia - next.inertia <= p.rel_tol * a.inertia;
    a = std::move(next);
    if (same || flat) break;
  }

  lloyd.set_means(a.label);
  KMeansResult out;
  out.inertia = lloyd.sse(a.label);
  out.iterations = it;
  std::vector<std::uint16_t> labels(a.label.begin(), a.label.end());
  out.labels = canonical_relabel(LabelMask(emb.height, emb.width, std::move(labels)));
  return out;
}

}  // namespace

std::vector<double> orient_minority_positive(std::span<const double> v) {
  std::size_t pos = 0, neg = 0;
  for (double x : v) {
    pos += x > 0.0;
    neg += x < 0.0;
  }
  const bool flip = pos > neg || (pos == neg && !v.empty() && v[0] < 0.0);
  std::vector<double> out(v.begin(), v.end());
  if (flip)
    for (double& x : out) x = -x;
  return out;
}

SaliencyMap fiedler_saliency(const EigenBasis& basis, std::uint32_t height,
                             std::uint32_t width) {
  const auto v2 = fiedler_vector(basis);
  check_grid(basis, height, width);
  const auto oriented = orient_minority_positive(v2);
  return {height, width, min_max_normalize(oriented)};
}

LabelMask threshold_mask(std::span<const double> oriented, std::uint32_t height,
                         std::uint32_t width, double tau) {
  if (oriented.size() != std::size_t{height} * width)
    throw ShapeError("vector length does not match grid");
  LabelMask mask(height, width);
  for (std::size_t i = 0; i < oriented.size(); ++i) mask.labels[i] = oriented[i] > tau;
  return mask;
}

LabelMask fiedler_binary_mask(const EigenBasis& basis, std::uint32_t height,
                              std::uint32_t width, double tau) {
  const auto v2 = fiedler_vector(basis);
  check_grid(basis, height, width);
  return threshold_mask(orient_minority_positive(v2), height, width, tau);
}

SpectralEmbedding stack_eigenvectors(const EigenBasis& basis, std::size_t g,
                                     std::uint32_t height, std::uint32_t width) {
  if (g == 0) throw ArgumentError("g must be at least 1");
  if (g > basis.size())
    throw ArgumentError("g=" + std::to_string(g) + " exceeds the " +
                        std::to_string(basis.size()) + " available eigenvectors");
  check_grid(basis, height, width);
  SpectralEmbedding emb{height, width, g, {}};
  const std::size_t n = basis.num_nodes();
  emb.coords.resize(n * g);
  const auto& V = basis.eigenvectors();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < g; ++c)
      emb.coords[i * g + c] = V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  return emb;
}

std::size_t count_distinct_points(const SpectralEmbedding& emb) {
  const std::size_t n = emb.num_points();
  if (n == 0) return 0;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto pa = emb.point(a), pb = emb.point(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t distinct = 1;
  for (std::size_t t = 1; t < n; ++t)
    if (less(idx[t - 1], idx[t])) ++distinct;
  return distinct;
}

LabelMask canonical_relabel(const LabelMask& mask) {
  std::vector<int> map(std::size_t{mask.max_label()} + 1, -1);
  int next = 0;
  LabelMask out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    auto& m = map[mask.labels[i]];
    if (m < 0) m = next++;
    out.labels[i] = static_cast<std::uint16_t>(m);
  }
  return out;
}

KMeansResult kmeans_restart(const SpectralEmbedding& emb, const ClusterParams& p,
                            std::uint32_t restart) {
  check_params(emb, p);
  return run_restart(emb, p, restart);
}

KMeansResult kmeans_cluster(const SpectralEmbedding& emb, const ClusterParams& p) {
  check_params(emb, p);
  KMeansResult best = run_restart(emb, p, 0);
  for (std::uint32_t r = 1; r < p.restarts; ++r) {
    KMeansResult cand = run_restart(emb, p, r);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

}  // namespace specseg
