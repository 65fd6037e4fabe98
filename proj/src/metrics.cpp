#include "specseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "specseg/error.hpp"

namespace specseg {

namespace {

void check_shapes(const LabelMask& pred, const LabelMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ShapeError("prediction " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " vs ground truth " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
}

// Decimal form that round-trips a double.
std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::uint16_t, ClassCounts> class_counts(const LabelMask& pred,
                                                  const LabelMask& gt) {
  check_shapes(pred, gt);
  std::map<std::uint16_t, ClassCounts> out;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto p = pred.labels[i], g = gt.labels[i];
    ++out[g].gt;
    ++out[p].pred;
    if (p == g) ++out[g].intersection;
  }
  return out;
}

std::map<std::uint16_t, double> iou_per_class(const LabelMask& pred, const LabelMask& gt,
                                              std::span<const std::uint16_t> class_ids) {
  const auto counts = class_counts(pred, gt);
  std::map<std::uint16_t, double> out;
  for (auto c : class_ids) {
    const auto it = counts.find(c);
    if (it == counts.end()) continue;
    const auto u = it->second.union_count();
    if (u == 0) continue;
    out[c] = static_cast<double>(it->second.intersection) / static_cast<double>(u);
  }
  return out;
}

double miou(const std::map<std::uint16_t, double>& per_class_iou) {
  if (per_class_iou.empty()) throw ArgumentError("mIoU needs at least one class");
  double s = 0.0;
  for (const auto& [c, v] : per_class_iou) s += v;
  return s / static_cast<double>(per_class_iou.size());
}

MatchReport evaluate_frame(const std::string& frame_id, const LabelMask& pred,
                           const LabelMask& gt, const MiouOptions& opts) {
  MatchReport r;
  r.frame_id = frame_id;
  r.pixel_counts = class_counts(pred, gt);
  std::vector<std::uint16_t> included;
  for (const auto& [c, counts] : r.pixel_counts) {
    if (counts.gt == 0) continue;
    if (opts.foreground_only && c == 0) continue;
    included.push_back(c);
  }
  if (included.empty())
    throw ArgumentError("frame " + frame_id + " has no class to average over");
  r.per_class_iou = iou_per_class(pred, gt, included);
  r.miou = miou(r.per_class_iou);
  return r;
}

MatchReport evaluate_table(const std::string& frame_id, const ContingencyTable& t,
                           const Assignment& a, const MiouOptions& opts) {
  MatchReport r;
  r.frame_id = frame_id;
  for (std::size_t c = 0; c < t.cols(); ++c) {
    std::uint64_t col = 0;
    for (std::size_t row = 0; row < t.rows(); ++row) col += t.at(row, c);
    if (col > 0) r.pixel_counts[t.gt_labels[c]].gt = col;
  }
  for (std::size_t row = 0; row < t.rows(); ++row) {
    const auto it = a.pred_to_gt.find(t.pred_labels[row]);
    std::uint64_t row_sum = 0;
    for (std::size_t c = 0; c < t.cols(); ++c) row_sum += t.at(row, c);
    if (row_sum == 0) continue;
    if (it == a.pred_to_gt.end())
      throw ArgumentError("assignment does not cover predicted label " +
                          std::to_string(t.pred_labels[row]));
    auto& counts = r.pixel_counts[it->second];
    counts.pred += row_sum;
    const auto col = std::lower_bound(t.gt_labels.begin(), t.gt_labels.end(), it->second);
    if (col != t.gt_labels.end() && *col == it->second)
      counts.intersection += t.at(row, static_cast<std::size_t>(col - t.gt_labels.begin()));
  }
  for (const auto& [c, counts] : r.pixel_counts) {
    if (counts.gt == 0) continue;
    if (opts.foreground_only && c == 0) continue;
    r.per_class_iou[c] = static_cast<double>(counts.intersection) /
                         static_cast<double>(counts.union_count());
  }
  if (r.per_class_iou.empty())
    throw ArgumentError("frame " + frame_id + " has no class to average over");
  r.miou = miou(r.per_class_iou);
  return r;
}

MeanStd mean_and_population_std(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("cannot aggregate an empty set");
  // Deviations from the first value keep identical inputs at exactly zero spread.
  const double x0 = values.front();
  const double n = static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += v - x0;
  const double shift = s / n;
  double ss = 0.0;
  for (double v : values) ss += (v - x0 - shift) * (v - x0 - shift);
  const double mean = x0 + shift;
  return {mean, std::sqrt(ss / n)};
}

DatasetSummary aggregate(std::span<const MatchReport> reports) {
  if (reports.empty()) throw ArgumentError("cannot aggregate zero reports");
  std::vector<double> mious;
  std::map<std::uint16_t, std::pair<double, std::size_t>> per_class;
  for (const auto& r : reports) {
    mious.push_back(r.miou);
    for (const auto& [c, v] : r.per_class_iou) {
      per_class[c].first += v;
      ++per_class[c].second;
    }
  }
  const auto ms = mean_and_population_std(mious);
  DatasetSummary out;
  out.n_frames = reports.size();
  out.miou_mean = ms.mean;
  out.miou_std = ms.std;
  for (const auto& [c, acc] : per_class)
    out.per_class_mean[c] = acc.first / static_cast<double>(acc.second);
  return out;
}

std::string report_to_json(const MatchReport& report) {
  nlohmann::ordered_json j;
  j["frame_id"] = report.frame_id;
  nlohmann::ordered_json ious = nlohmann::ordered_json::object();
  for (const auto& [c, v] : report.per_class_iou) ious[std::to_string(c)] = v;
  j["per_class_iou"] = ious;
  j["miou"] = report.miou;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [c, k] : report.pixel_counts)
    counts[std::to_string(c)] = {{"gt", k.gt}, {"pred", k.pred}, {"intersection", k.intersection}};
  j["pixel_counts"] = counts;
  return j.dump(2) + "\n";
}

std::string summary_csv_line(const SummaryRow& row) {
  return row.dataset + "," + row.task + "," + std::to_string(row.k) + "," +
         std::to_string(row.g) + "," + full_precision(row.summary.miou_mean) + "," +
         full_precision(row.summary.miou_std) + "," + std::to_string(row.summary.n_frames);
}

std::string percent2(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value * 100.0);
  return buf;
}

}  // namespace specseg
