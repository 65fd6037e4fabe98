// specseg: spectral segmentation of dense feature maps.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specseg/commands.hpp"
#include "specseg/error.hpp"

namespace {

using specseg::RunConfig;

struct Flags {
  std::string mode, interp, match_mode, match_scope, config;
  std::uint32_t k = 0, g = 0, height = 0, width = 0;
  double tau = 0.0, eps_degree = 0.0, eig_tol = 0.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out_dir, dataset, task;
};

// Options shared by every subcommand; which ones apply depends on the command.
void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON file with option defaults");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--eps-degree", f.eps_degree, "degree floor for D^-1/2");
  app->add_option("--eig-tol", f.eig_tol, "eigenpair residual tolerance");
  app->add_option("--workers", f.workers, "frames processed in parallel")
      ->check(CLI::PositiveNumber);
  app->add_option("--out-dir", f.out_dir, "output directory");
}

void add_segment_opts(CLI::App* app, Flags& f) {
  app->add_option("--mode", f.mode, "cluster | salient");
  app->add_option("--k", f.k, "number of clusters");
  app->add_option("--g", f.g, "eigenvectors used for clustering (default k)");
  app->add_option("--tau", f.tau, "Fiedler threshold in salient mode");
  app->add_option("--interp", f.interp, "nearest-exact | majority");
}

void add_match_opts(CLI::App* app, Flags& f) {
  app->add_option("--match-mode", f.match_mode, "auto | hungarian | majority");
  app->add_option("--match-scope", f.match_scope, "frame | dataset");
  app->add_flag("--foreground-only", "exclude class 0 from mIoU");
  app->add_option("--dataset", f.dataset, "dataset name for summary rows");
  app->add_option("--task", f.task, "task name for summary rows");
}

bool given(const CLI::App* app, const std::string& name) {
  try {
    return app->count(name) > 0;
  } catch (const CLI::OptionNotFound&) {
    return false;
  }
}

// Defaults, then the --config file, then flags given on the command line.
RunConfig resolve(const CLI::App* app, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = specseg::load_config_file(f.config, cfg);
  if (given(app, "--mode")) cfg.mode = specseg::parse_segment_mode(f.mode);
  if (given(app, "--k")) cfg.k = f.k;
  if (given(app, "--g")) cfg.g = f.g;
  if (given(app, "--tau")) cfg.tau = f.tau;
  if (given(app, "--seed")) cfg.seed = f.seed;
  if (given(app, "--interp")) cfg.interp = specseg::parse_interpolation(f.interp);
  if (given(app, "--height")) cfg.out_height = f.height;
  if (given(app, "--width")) cfg.out_width = f.width;
  if (given(app, "--eps-degree")) cfg.eps_degree = f.eps_degree;
  if (given(app, "--eig-tol")) cfg.eig_tol = f.eig_tol;
  if (given(app, "--match-mode")) cfg.match_mode = specseg::parse_match_setting(f.match_mode);
  if (given(app, "--match-scope")) cfg.match_scope = specseg::parse_match_scope(f.match_scope);
  if (given(app, "--foreground-only")) cfg.foreground_only = true;
  if (given(app, "--workers")) cfg.workers = f.workers;
  if (given(app, "--record-timings")) cfg.record_timings = true;
  if (given(app, "--dataset")) cfg.dataset = f.dataset;
  if (given(app, "--task")) cfg.task = f.task;
  if (given(app, "--out-dir")) cfg.out_dir = f.out_dir;
  if (cfg.out_dir.empty()) throw specseg::ArgumentError("--out-dir is required");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral segmentation of dense feature maps"};
  app.require_subcommand(1);
  Flags f;
  std::string features, pred_dir, gt_dir;
  std::vector<std::uint32_t> k_list, g_list, indices;

  auto* seg = app.add_subcommand("segment", "segment FMAP feature maps into label masks");
  seg->add_option("features", features, "FMAP file or directory")->required();
  add_common(seg, f);
  add_segment_opts(seg, f);
  seg->add_option("--height", f.height, "output mask height");
  seg->add_option("--width", f.width, "output mask width");
  seg->add_flag("--record-timings", "add per-stage timings to manifest.json");

  auto* ev = app.add_subcommand("eval", "match predicted masks to ground truth and score");
  ev->add_option("pred", pred_dir, "directory of predicted PGM masks")->required();
  ev->add_option("gt", gt_dir, "directory of ground-truth PGM masks")->required();
  add_common(ev, f);
  add_match_opts(ev, f);
  ev->add_option("--k", f.k, "k recorded in summary.csv");
  ev->add_option("--g", f.g, "g recorded in summary.csv");

  auto* sw = app.add_subcommand("sweep", "grid over k and g with cluster mode");
  sw->add_option("features", features, "FMAP file or directory")->required();
  sw->add_option("gt", gt_dir, "directory of ground-truth PGM masks")->required();
  sw->add_option("--k-list", k_list, "k values")->delimiter(',')->required();
  sw->add_option("--g-list", g_list, "g values")->delimiter(',')->required();
  add_common(sw, f);
  add_match_opts(sw, f);
  sw->add_option("--interp", f.interp, "nearest-exact | majority");

  auto* vis = app.add_subcommand("visualize", "export eigenvectors as 16-bit PGM images");
  vis->add_option("features", features, "FMAP file or directory")->required();
  vis->add_option("--indices", indices, "1-based eigenvector ranks")
      ->delimiter(',')
      ->default_str("2");
  add_common(vis, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? specseg::kExitOk : specseg::kExitFailure;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const RunConfig cfg = resolve(sub, f);
    if (sub == seg) return specseg::cmd_segment(cfg, features, cfg.out_dir, std::cerr);
    if (sub == ev) return specseg::cmd_eval(cfg, pred_dir, gt_dir, cfg.out_dir, std::cerr);
    if (sub == sw)
      return specseg::cmd_sweep(cfg, features, gt_dir, k_list, g_list, cfg.out_dir, std::cerr);
    if (indices.empty()) indices = {2};
    return specseg::cmd_visualize(cfg, features, indices, cfg.out_dir, std::cerr);
  } catch (const specseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return specseg::kExitFailure;
  }
}
