#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "specseg/postprocess.hpp"
#include "specseg/tensor_io.hpp"

namespace specseg {

struct ClassCounts {
  std::uint64_t gt = 0;
  std::uint64_t pred = 0;
  std::uint64_t intersection = 0;

  std::uint64_t union_count() const { return gt + pred - intersection; }
};

/// IoU per class id; classes whose union is empty are omitted.
std::map<std::uint16_t, double> iou_per_class(const LabelMask& pred, const LabelMask& gt,
                                              std::span<const std::uint16_t> class_ids);

std::map<std::uint16_t, ClassCounts> class_counts(const LabelMask& pred,
                                                  const LabelMask& gt);

struct MatchReport {
  std::string frame_id;
  std::map<std::uint16_t, double> per_class_iou;  // classes included in miou
  std::map<std::uint16_t, ClassCounts> pixel_counts;
  double miou = 0.0;
};

struct MiouOptions {
  /// Drop class 0 (background) from the average.
  bool foreground_only = false;
};

/// Averages IoU over the classes present in the ground truth. Throws
/// ArgumentError when no class qualifies.
MatchReport evaluate_frame(const std::string& frame_id, const LabelMask& pred,
                           const LabelMask& gt, const MiouOptions& opts = {});

/// Metrics of `pred` relabeled by `a`, computed from the contingency table
/// alone. Agrees with evaluate_frame(id, relabel(pred, a), gt, opts).
MatchReport evaluate_table(const std::string& frame_id, const ContingencyTable& t,
                           const Assignment& a, const MiouOptions& opts = {});

/// Arithmetic mean of the given per-class IoUs.
double miou(const std::map<std::uint16_t, double>& per_class_iou);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_and_population_std(std::span<const double> values);

struct DatasetSummary {
  std::size_t n_frames = 0;
  double miou_mean = 0.0;
  double miou_std = 0.0;
  /// Mean IoU per class over the frames that include the class.
  std::map<std::uint16_t, double> per_class_mean;
};

/// Unweighted mean and population std of per-frame mIoU.
DatasetSummary aggregate(std::span<const MatchReport> reports);

std::string report_to_json(const MatchReport& report);

struct SummaryRow {
  std::string dataset;
  std::string task;
  std::uint32_t k = 0;
  std::uint32_t g = 0;
  DatasetSummary summary;
};

inline constexpr const char* kSummaryCsvHeader =
    "dataset,task,k,g,miou_mean,miou_std,n_frames";

/// One CSV line (no newline) with metrics at full round-trip precision.
std::string summary_csv_line(const SummaryRow& row);

/// Format a value in [0, 1] as a percentage with two decimals ("80.11").
std::string percent2(double value);

}  // namespace specseg
