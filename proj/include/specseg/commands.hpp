#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specseg/metrics.hpp"
#include "specseg/partition.hpp"
#include "specseg/postprocess.hpp"
#include "specseg/spectral.hpp"
#include "specseg/tensor_io.hpp"

namespace specseg {

enum class SegmentMode { kCluster, kSalient };
enum class MatchSetting { kAuto, kHungarian, kMajority };
enum class MatchScope { kFrame, kDataset };

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitPartial = 2;

struct RunConfig {
  SegmentMode mode = SegmentMode::kCluster;
  std::uint32_t k = 15;
  std::optional<std::uint32_t> g;  // defaults to k
  double tau = 0.0;
  std::uint64_t seed = 0;
  Interpolation interp = Interpolation::kNearestExact;
  std::uint32_t out_height = 0;  // 0: take from the sidecar manifest
  std::uint32_t out_width = 0;
  double eps_degree = kDefaultEpsDegree;
  double eig_tol = kDefaultEigTol;
  MatchSetting match_mode = MatchSetting::kAuto;
  MatchScope match_scope = MatchScope::kFrame;
  bool foreground_only = false;
  unsigned workers = 1;
  std::string out_dir;
  bool record_timings = false;
  std::string dataset = "dataset";
  std::string task = "binary";

  std::uint32_t effective_g() const { return g.value_or(k); }
  /// Throws ArgumentError on out-of-range values.
  void validate() const;
};

/// Overlay keys from a JSON object onto `cfg`. Keys mirror the long flag
/// names with dashes or underscores. Unknown keys are an error.
void merge_config_json(RunConfig& cfg, std::string_view json_text);
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Configuration echoed into manifests. Excludes the worker count and the
/// output directory, which must not change the output tree.
std::string config_to_json(const RunConfig& cfg);

std::string to_string(SegmentMode m);
std::string to_string(Interpolation m);
std::string to_string(MatchSetting m);
std::string to_string(MatchScope m);
SegmentMode parse_segment_mode(std::string_view s);
Interpolation parse_interpolation(std::string_view s);
MatchSetting parse_match_setting(std::string_view s);
MatchScope parse_match_scope(std::string_view s);

/// FMAP inputs: a single file, or every *.fmap in a directory sorted by name.
std::vector<std::filesystem::path> list_feature_files(const std::filesystem::path& input);

struct FrameSegmentation {
  LabelMask lowres;
  LabelMask upscaled;
  std::optional<SaliencyMap> saliency;
  Eigen::VectorXd eigenvalues;
  double graph_density = 0.0;
  std::vector<std::pair<std::string, double>> timings_ms;
};

/// Full per-frame pipeline: affinity, Laplacian, eigenpairs, then Fiedler
/// thresholding or k-means, then upscaling to out_height x out_width.
FrameSegmentation segment_frame(const FeatureMap& fm, const RunConfig& cfg,
                                std::uint32_t out_height, std::uint32_t out_width);

struct FramePair {
  std::string frame_id;
  LabelMask pred;
  LabelMask gt;
};

/// Matching then metrics for a set of frames. Frame scope matches each frame
/// on its own table; dataset scope matches once on the summed table.
/// Auto mode picks Hungarian iff the table is square, majority otherwise.
std::vector<MatchReport> evaluate_pairs(const std::vector<FramePair>& pairs,
                                        const RunConfig& cfg);

Assignment choose_assignment(const ContingencyTable& t, MatchSetting mode);

int cmd_segment(const RunConfig& cfg, const std::filesystem::path& features,
                const std::filesystem::path& out_dir, std::ostream& log);

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& pred_dir,
             const std::filesystem::path& gt_dir, const std::filesystem::path& out_dir,
             std::ostream& log);

int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& features,
              const std::filesystem::path& gt_dir, const std::vector<std::uint32_t>& k_list,
              const std::vector<std::uint32_t>& g_list, const std::filesystem::path& out_dir,
              std::ostream& log);

/// Indices are 1-based eigenvector ranks (1 = smallest eigenvalue).
int cmd_visualize(const RunConfig& cfg, const std::filesystem::path& features,
                  const std::vector<std::uint32_t>& indices,
                  const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace specseg
