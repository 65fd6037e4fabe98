#include "specseg/postprocess.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "specseg/error.hpp"

namespace specseg {

namespace {

void check_upscale(const LabelMask& mask, std::uint32_t out_h, std::uint32_t out_w) {
  if (mask.height == 0 || mask.width == 0 ||
      mask.labels.size() != std::size_t{mask.height} * mask.width)
    throw ArgumentError("malformed input mask");
  if (out_h < mask.height || out_w < mask.width)
    throw UnsupportedError("downscaling " + std::to_string(mask.height) + "x" +
                           std::to_string(mask.width) + " to " + std::to_string(out_h) +
                           "x" + std::to_string(out_w) + " is not supported");
}

// floor((dst + 0.5) * src / out) in integers, clamped to src - 1.
std::uint32_t nearest_exact_index(std::uint32_t dst, std::uint32_t src, std::uint32_t out) {
  const std::uint64_t i = (2 * std::uint64_t{dst} + 1) * src / (2 * std::uint64_t{out});
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(i, src - 1));
}

// Source cells overlapped by output interval [dst, dst+1) mapped into source
// units. Everything is scaled by `out` so source cell r spans
// [r * out, (r + 1) * out) and the output interval spans [dst * src,
// (dst + 1) * src); overlaps are then exact integers.
struct Span1D {
  std::uint32_t cell[2];
  std::uint64_t overlap[2];
  int count;
};

Span1D footprint(std::uint32_t dst, std::uint32_t src, std::uint32_t out) {
  const std::uint64_t lo = std::uint64_t{dst} * src;
  const std::uint64_t hi = lo + src;
  Span1D s{};
  const auto first = static_cast<std::uint32_t>(lo / out);
  for (std::uint32_t r = first; r < src && std::uint64_t{r} * out < hi && s.count < 2; ++r) {
    const std::uint64_t a = std::max<std::uint64_t>(lo, std::uint64_t{r} * out);
    const std::uint64_t b = std::min<std::uint64_t>(hi, std::uint64_t{r + 1} * out);
    if (b > a) {
      s.cell[s.count] = r;
      s.overlap[s.count] = b - a;
      ++s.count;
    }
  }
  return s;
}

}  // namespace

LabelMask upscale_nearest_exact(const LabelMask& mask, std::uint32_t out_h,
                                std::uint32_t out_w) {
  check_upscale(mask, out_h, out_w);
  LabelMask out(out_h, out_w);
  std::vector<std::uint32_t> col_src(out_w);
  for (std::uint32_t c = 0; c < out_w; ++c)
    col_src[c] = nearest_exact_index(c, mask.width, out_w);
  for (std::uint32_t r = 0; r < out_h; ++r) {
    const std::uint32_t sr = nearest_exact_index(r, mask.height, out_h);
    for (std::uint32_t c = 0; c < out_w; ++c)
      out.labels[std::size_t{r} * out_w + c] = mask.at(sr, col_src[c]);
  }
  return out;
}

LabelMask upscale_majority(const LabelMask& mask, std::uint32_t out_h,
                           std::uint32_t out_w) {
  check_upscale(mask, out_h, out_w);
  LabelMask out(out_h, out_w);
  std::vector<Span1D> cols(out_w);
  for (std::uint32_t c = 0; c < out_w; ++c) cols[c] = footprint(c, mask.width, out_w);

  struct Vote {
    std::uint16_t label;
    std::uint64_t area;
    std::uint64_t dist2;  // to nearest cell center of this label
  };
  for (std::uint32_t r = 0; r < out_h; ++r) {
    const Span1D rows = footprint(r, mask.height, out_h);
    for (std::uint32_t c = 0; c < out_w; ++c) {
      const Span1D& cs = cols[c];
      Vote votes[4];
      int nv = 0;
      for (int a = 0; a < rows.count; ++a) {
        for (int b = 0; b < cs.count; ++b) {
          const std::uint16_t lab = mask.at(rows.cell[a], cs.cell[b]);
          const std::uint64_t area = rows.overlap[a] * cs.overlap[b];
          // Distances in units of 1 / (2 * out_h * out_w) source pixels so
          // the footprint center (2r+1)*h/(2H) and cell center (2i+1)/2 are
          // both integers.
          const auto dy = static_cast<std::int64_t>((2 * std::uint64_t{r} + 1) * mask.height) -
                          static_cast<std::int64_t>((2 * std::uint64_t{rows.cell[a]} + 1) * out_h);
          const auto dx = static_cast<std::int64_t>((2 * std::uint64_t{c} + 1) * mask.width) -
                          static_cast<std::int64_t>((2 * std::uint64_t{cs.cell[b]} + 1) * out_w);
          const std::uint64_t d2 =
              static_cast<std::uint64_t>(dy * dy) * out_w * out_w +
              static_cast<std::uint64_t>(dx * dx) * out_h * out_h;
          int slot = 0;
          while (slot < nv && votes[slot].label != lab) ++slot;
          if (slot == nv) votes[nv++] = {lab, 0, std::numeric_limits<std::uint64_t>::max()};
          votes[slot].area += area;
          votes[slot].dist2 = std::min(votes[slot].dist2, d2);
        }
      }
      const Vote* best = &votes[0];
      for (int v = 1; v < nv; ++v) {
        const Vote& cand = votes[v];
        if (cand.area != best->area) {
          if (cand.area > best->area) best = &cand;
        } else if (cand.dist2 != best->dist2) {
          if (cand.dist2 < best->dist2) best = &cand;
        } else if (cand.label < best->label) {
          best = &cand;
        }
      }
      out.labels[std::size_t{r} * out_w + c] = best->label;
    }
  }
  return out;
}

LabelMask upscale(const LabelMask& mask, std::uint32_t out_h, std::uint32_t out_w,
                  Interpolation mode) {
  return mode == Interpolation::kMajority ? upscale_majority(mask, out_h, out_w)
                                          : upscale_nearest_exact(mask, out_h, out_w);
}

std::uint64_t ContingencyTable::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

void ContingencyTable::accumulate(const ContingencyTable& other) {
  ContingencyTable merged;
  std::set_union(pred_labels.begin(), pred_labels.end(), other.pred_labels.begin(),
                 other.pred_labels.end(), std::back_inserter(merged.pred_labels));
  std::set_union(gt_labels.begin(), gt_labels.end(), other.gt_labels.begin(),
                 other.gt_labels.end(), std::back_inserter(merged.gt_labels));
  merged.counts.assign(merged.rows() * merged.cols(), 0);
  auto add = [&](const ContingencyTable& t) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const auto mr = std::lower_bound(merged.pred_labels.begin(), merged.pred_labels.end(),
                                       t.pred_labels[r]) - merged.pred_labels.begin();
      for (std::size_t c = 0; c < t.cols(); ++c) {
        const auto mc = std::lower_bound(merged.gt_labels.begin(), merged.gt_labels.end(),
                                         t.gt_labels[c]) - merged.gt_labels.begin();
        merged.counts[static_cast<std::size_t>(mr) * merged.cols() +
                      static_cast<std::size_t>(mc)] += t.at(r, c);
      }
    }
  };
  add(*this);
  add(other);
  *this = std::move(merged);
}

ContingencyTable contingency(const LabelMask& pred, const LabelMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ShapeError("prediction " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " vs ground truth " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
  ContingencyTable t;
  t.pred_labels = pred.distinct_labels();
  t.gt_labels = gt.distinct_labels();
  std::vector<std::size_t> row_of(std::size_t{pred.max_label()} + 1, 0);
  std::vector<std::size_t> col_of(std::size_t{gt.max_label()} + 1, 0);
  for (std::size_t r = 0; r < t.rows(); ++r) row_of[t.pred_labels[r]] = r;
  for (std::size_t c = 0; c < t.cols(); ++c) col_of[t.gt_labels[c]] = c;
  t.counts.assign(t.rows() * t.cols(), 0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    ++t.counts[row_of[pred.labels[i]] * t.cols() + col_of[gt.labels[i]]];
  return t;
}

std::uint64_t Assignment::matched_total(const ContingencyTable& t) const {
  std::uint64_t s = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto it = pred_to_gt.find(t.pred_labels[r]);
    if (it == pred_to_gt.end()) continue;
    const auto c = std::lower_bound(t.gt_labels.begin(), t.gt_labels.end(), it->second);
    if (c != t.gt_labels.end() && *c == it->second)
      s += t.at(r, static_cast<std::size_t>(c - t.gt_labels.begin()));
  }
  return s;
}

std::vector<std::size_t> solve_assignment(std::span<const std::int64_t> cost,
                                          std::size_t n) {
  if (cost.size() != n * n) throw ArgumentError("cost matrix must be n x n");
  // 1-based potentials formulation; column 0 is a virtual sentinel.
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> match_col(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match_col[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match_col[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match_col[j] - 1] = j - 1;
  return row_to_col;
}

Assignment match_hungarian(const ContingencyTable& t) {
  if (t.rows() != t.cols())
    throw ArgumentError("Hungarian matching needs a square table, got " +
                        std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  const std::size_t n = t.rows();
  std::vector<std::int64_t> cost(n * n);
  for (std::size_t i = 0; i < n * n; ++i) cost[i] = -static_cast<std::int64_t>(t.counts[i]);
  const auto cols = solve_assignment(cost, n);
  Assignment a;
  a.mode = MatchMode::kOneToOne;
  for (std::size_t r = 0; r < n; ++r) a.pred_to_gt[t.pred_labels[r]] = t.gt_labels[cols[r]];
  return a;
}

Assignment match_majority(const ContingencyTable& t) {
  Assignment a;
  a.mode = MatchMode::kManyToOne;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < t.cols(); ++c)
      if (t.at(r, c) > t.at(r, best)) best = c;
    a.pred_to_gt[t.pred_labels[r]] = t.cols() ? t.gt_labels[best] : 0;
  }
  return a;
}

LabelMask relabel(const LabelMask& pred, const Assignment& a) {
  std::vector<int> map(std::size_t{pred.max_label()} + 1, -1);
  for (const auto& [p, g] : a.pred_to_gt)
    if (p < map.size()) map[p] = g;
  LabelMask out(pred.height, pred.width);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int m = map[pred.labels[i]];
    if (m < 0)
      throw ArgumentError("assignment does not cover predicted label " +
                          std::to_string(pred.labels[i]));
    out.labels[i] = static_cast<std::uint16_t>(m);
  }
  return out;
}

}  // namespace specseg
