#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "specseg/tensor_io.hpp"

namespace specseg {

enum class Interpolation { kNearestExact, kMajority };

/// Half-pixel-offset nearest index: src = min(floor((dst + 0.5) * h / H), h - 1).
LabelMask upscale_nearest_exact(const LabelMask& mask, std::uint32_t out_height,
                                std::uint32_t out_width);

/// Each output pixel's footprint covers at most 2x2 source pixels when
/// upscaling. The label with the largest covered area wins; ties go to the
/// label whose cell center is nearest the footprint center, then to the
/// smaller label.
LabelMask upscale_majority(const LabelMask& mask, std::uint32_t out_height,
                           std::uint32_t out_width);

LabelMask upscale(const LabelMask& mask, std::uint32_t out_height,
                  std::uint32_t out_width, Interpolation mode);

/// Joint histogram of predicted label (rows) against ground-truth class (cols).
struct ContingencyTable {
  std::vector<std::uint16_t> pred_labels;  // row ids, ascending
  std::vector<std::uint16_t> gt_labels;    // col ids, ascending
  std::vector<std::uint64_t> counts;       // row-major

  std::size_t rows() const { return pred_labels.size(); }
  std::size_t cols() const { return gt_labels.size(); }
  std::uint64_t at(std::size_t r, std::size_t c) const { return counts[r * cols() + c]; }
  std::uint64_t total() const;

  /// Sum of another table into this one over the union of labels.
  void accumulate(const ContingencyTable& other);
};

/// Rows and columns are the labels present in each mask.
ContingencyTable contingency(const LabelMask& pred, const LabelMask& gt);

enum class MatchMode { kOneToOne, kManyToOne };

struct Assignment {
  MatchMode mode = MatchMode::kOneToOne;
  std::map<std::uint16_t, std::uint16_t> pred_to_gt;

  /// Sum of table counts over matched (pred, gt) cells.
  std::uint64_t matched_total(const ContingencyTable& t) const;
};

/// Square min-cost assignment on an n x n cost matrix (row-major); returns
/// the column assigned to each row. Hungarian method with potentials, O(n^3).
std::vector<std::size_t> solve_assignment(std::span<const std::int64_t> cost,
                                          std::size_t n);

/// Injective matching maximizing the total matched pixel count.
Assignment match_hungarian(const ContingencyTable& t);

/// Each predicted label goes to its most-overlapped class; ties to the
/// smallest class id.
Assignment match_majority(const ContingencyTable& t);

LabelMask relabel(const LabelMask& pred, const Assignment& a);

}  // namespace specseg
