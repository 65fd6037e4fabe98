#include "specseg/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include <json.hpp>

#include "specseg/affinity.hpp"
#include "specseg/error.hpp"

namespace specseg {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must not throw.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (threads <= 1) {
    run();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run);
}

class Stopwatch {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
                   path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create directory " + dir.string());
}

int exit_code(std::size_t ok, std::size_t failed) {
  if (ok == 0) return kExitFailure;
  return failed == 0 ? kExitOk : kExitPartial;
}

struct FrameSize {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
};

// Optional manifest.json next to the features, as written by the feature
// extractor: an array (or {"frames": [...]}) of {frame_id, H, W, h, w, d}.
std::map<std::string, FrameSize> load_sidecar(const fs::path& features) {
  const fs::path dir = fs::is_directory(features) ? features : features.parent_path();
  const fs::path path = dir / "manifest.json";
  std::map<std::string, FrameSize> out;
  if (!fs::exists(path)) return out;
  const auto bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
    const auto& frames = j.is_object() ? j.at("frames") : j;
    for (const auto& f : frames) {
      FrameSize s;
      s.height = f.at("H").get<std::uint32_t>();
      s.width = f.at("W").get<std::uint32_t>();
      s.grid_h = f.value("h", 0u);
      s.grid_w = f.value("w", 0u);
      out[f.at("frame_id").get<std::string>()] = s;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad sidecar manifest " + path.string() + ": " + e.what());
  }
  return out;
}

std::vector<fs::path> list_pgm_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

ojson summary_json(const DatasetSummary& s) {
  ojson j;
  j["n_frames"] = s.n_frames;
  j["miou_mean"] = s.miou_mean;
  j["miou_std"] = s.miou_std;
  ojson pc = ojson::object();
  for (const auto& [c, v] : s.per_class_mean) pc[std::to_string(c)] = v;
  j["per_class_mean"] = pc;
  return j;
}

std::vector<MatchReport> evaluate_tables(const std::vector<std::string>& ids,
                                         const std::vector<ContingencyTable>& tables,
                                         const RunConfig& cfg) {
  const MiouOptions opts{cfg.foreground_only};
  std::vector<MatchReport> out;
  out.reserve(tables.size());
  if (cfg.match_scope == MatchScope::kDataset) {
    ContingencyTable total;
    for (const auto& t : tables) total.accumulate(t);
    const Assignment a = choose_assignment(total, cfg.match_mode);
    for (std::size_t i = 0; i < tables.size(); ++i)
      out.push_back(evaluate_table(ids[i], tables[i], a, opts));
  } else {
    for (std::size_t i = 0; i < tables.size(); ++i)
      out.push_back(evaluate_table(ids[i], tables[i],
                                   choose_assignment(tables[i], cfg.match_mode), opts));
  }
  return out;
}

}  // namespace

std::vector<fs::path> list_feature_files(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw IoError("no such file or directory: " + input.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_regular_file() && e.path().extension() == ".fmap") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

FrameSegmentation segment_frame(const FeatureMap& fm, const RunConfig& cfg,
                                std::uint32_t out_height, std::uint32_t out_width) {
  Stopwatch sw;
  FrameSegmentation out;
  const AffinityGraph graph = build_affinity(fm);
  out.graph_density = graph.density();
  out.timings_ms.emplace_back("affinity", sw.lap_ms());

  const NormalizedLaplacian L = build_laplacian(graph, cfg.eps_degree);
  const std::size_t g = cfg.effective_g();
  const std::size_t m = cfg.mode == SegmentMode::kSalient ? 2 : std::max<std::size_t>(g, 2);
  if (m > L.size())
    throw ArgumentError("need " + std::to_string(m) + " eigenvectors but the graph has " +
                        std::to_string(L.size()) + " nodes");
  EigenSolverOptions eopts;
  eopts.tol = cfg.eig_tol;
  eopts.seed = cfg.seed;
  const EigenBasis basis = smallest_eigenpairs(L, m, eopts);
  out.eigenvalues = basis.eigenvalues();
  out.timings_ms.emplace_back("eigen", sw.lap_ms());

  if (cfg.mode == SegmentMode::kSalient) {
    out.lowres = fiedler_binary_mask(basis, fm.height, fm.width, cfg.tau);
    out.saliency = fiedler_saliency(basis, fm.height, fm.width);
  } else {
    ClusterParams p;
    p.k = cfg.k;
    p.g = static_cast<std::uint32_t>(g);
    p.seed = cfg.seed;
    out.lowres = kmeans_cluster(stack_eigenvectors(basis, g, fm.height, fm.width), p).labels;
  }
  out.timings_ms.emplace_back("partition", sw.lap_ms());

  out.upscaled = upscale(out.lowres, out_height, out_width, cfg.interp);
  out.timings_ms.emplace_back("upscale", sw.lap_ms());
  return out;
}

Assignment choose_assignment(const ContingencyTable& t, MatchSetting mode) {
  switch (mode) {
    case MatchSetting::kHungarian: return match_hungarian(t);
    case MatchSetting::kMajority: return match_majority(t);
    default: return t.rows() == t.cols() ? match_hungarian(t) : match_majority(t);
  }
}

std::vector<MatchReport> evaluate_pairs(const std::vector<FramePair>& pairs,
                                        const RunConfig& cfg) {
  std::vector<std::string> ids;
  std::vector<ContingencyTable> tables;
  for (const auto& p : pairs) {
    ids.push_back(p.frame_id);
    tables.push_back(contingency(p.pred, p.gt));
  }
  return evaluate_tables(ids, tables, cfg);
}

int cmd_segment(const RunConfig& cfg, const fs::path& features, const fs::path& out_dir,
                std::ostream& log) {
  std::vector<fs::path> files;
  std::map<std::string, FrameSize> sidecar;
  try {
    cfg.validate();
    files = list_feature_files(features);
    if (files.empty()) throw IoError("no FMAP files found in " + features.string());
    sidecar = load_sidecar(features);
    ensure_dir(out_dir / "lowres");
    ensure_dir(out_dir / "masks");
    if (cfg.mode == SegmentMode::kSalient) ensure_dir(out_dir / "saliency");
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  struct Outcome {
    std::string frame_id;
    std::string error;
    ojson info;
  };
  std::vector<Outcome> outcomes(files.size());

  parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
    Outcome& o = outcomes[i];
    o.frame_id = files[i].stem().string();
    try {
      const FeatureMap fm = read_feature_map(files[i]);
      std::uint32_t H = cfg.out_height, W = cfg.out_width;
      if (H == 0) {
        const auto it = sidecar.find(o.frame_id);
        if (it == sidecar.end())
          throw ArgumentError("no output size: pass --height/--width or provide manifest.json");
        if ((it->second.grid_h && it->second.grid_h != fm.height) ||
            (it->second.grid_w && it->second.grid_w != fm.width))
          throw ShapeError("sidecar grid size disagrees with the FMAP header");
        H = it->second.height;
        W = it->second.width;
      }
      const FrameSegmentation seg = segment_frame(fm, cfg, H, W);
      write_mask(seg.lowres, out_dir / "lowres" / (o.frame_id + ".pgm"));
      write_mask(seg.upscaled, out_dir / "masks" / (o.frame_id + ".pgm"));
      if (seg.saliency) write_saliency(*seg.saliency, out_dir / "saliency" / (o.frame_id + ".pgm"));

      o.info["grid"] = {fm.height, fm.width};
      o.info["output"] = {H, W};
      o.info["num_labels"] = seg.lowres.num_labels();
      o.info["graph_density"] = seg.graph_density;
      o.info["eigenvalues"] = std::vector<double>(seg.eigenvalues.begin(), seg.eigenvalues.end());
      if (cfg.record_timings) {
        ojson t = ojson::object();
        for (const auto& [stage, ms] : seg.timings_ms) t[stage] = ms;
        o.info["timings_ms"] = t;
      }
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  ojson manifest;
  manifest["command"] = "segment";
  manifest["config"] = ojson::parse(config_to_json(cfg));
  ojson frames = ojson::array();
  std::size_t ok = 0, failed = 0;
  for (const auto& o : outcomes) {
    ojson f;
    f["frame_id"] = o.frame_id;
    if (o.error.empty()) {
      ++ok;
      f["status"] = "ok";
      for (const auto& [key, v] : o.info.items()) f[key] = v;
    } else {
      ++failed;
      f["status"] = "error";
      f["error"] = o.error;
      log << "frame " << o.frame_id << ": " << o.error << "\n";
    }
    frames.push_back(f);
  }
  manifest["frames"] = frames;
  manifest["summary"] = {{"ok", ok}, {"error", failed}};
  try {
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  log << "segmented " << ok << "/" << files.size() << " frames\n";
  return exit_code(ok, failed);
}

int cmd_eval(const RunConfig& cfg, const fs::path& pred_dir, const fs::path& gt_dir,
             const fs::path& out_dir, std::ostream& log) {
  std::vector<fs::path> preds, gts;
  try {
    cfg.validate();
    preds = list_pgm_files(pred_dir);
    gts = list_pgm_files(gt_dir);
    ensure_dir(out_dir / "reports");
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  std::set<std::string> gt_names;
  for (const auto& p : gts) gt_names.insert(p.filename().string());
  std::vector<std::string> unmatched_pred, unmatched_gt, matched;
  for (const auto& p : preds) {
    const auto name = p.filename().string();
    if (gt_names.erase(name)) matched.push_back(name);
    else unmatched_pred.push_back(name);
  }
  unmatched_gt.assign(gt_names.begin(), gt_names.end());
  for (const auto& n : unmatched_pred) log << "unmatched prediction: " << n << "\n";
  for (const auto& n : unmatched_gt) log << "unmatched ground truth: " << n << "\n";

  // Load and tabulate; per-frame failures are recorded, not fatal.
  std::vector<std::string> errors(matched.size());
  std::vector<ContingencyTable> tables(matched.size());
  parallel_for(matched.size(), cfg.workers, [&](std::size_t i) {
    try {
      tables[i] = contingency(read_mask(pred_dir / matched[i]), read_mask(gt_dir / matched[i]));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::vector<std::string> ids;
  std::vector<ContingencyTable> good;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (!errors[i].empty()) continue;
    ids.push_back(fs::path(matched[i]).stem().string());
    good.push_back(tables[i]);
  }

  std::vector<MatchReport> reports;
  std::map<std::string, std::string> frame_errors;
  if (cfg.match_scope == MatchScope::kDataset) {
    try {
      reports = evaluate_tables(ids, good, cfg);
    } catch (const Error& e) {
      for (const auto& id : ids) frame_errors[id] = e.what();
    }
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      try {
        auto r = evaluate_tables({ids[i]}, {good[i]}, cfg);
        reports.push_back(std::move(r.front()));
      } catch (const Error& e) {
        frame_errors[ids[i]] = e.what();
      }
    }
  }
  for (std::size_t i = 0; i < matched.size(); ++i)
    if (!errors[i].empty()) frame_errors[fs::path(matched[i]).stem().string()] = errors[i];

  ojson frames = ojson::array();
  std::map<std::string, const MatchReport*> by_id;
  for (const auto& r : reports) by_id[r.frame_id] = &r;
  try {
    for (const auto& name : matched) {
      const auto id = fs::path(name).stem().string();
      ojson f;
      f["frame_id"] = id;
      if (const auto it = by_id.find(id); it != by_id.end()) {
        f["status"] = "ok";
        f["miou"] = it->second->miou;
        write_text(out_dir / "reports" / (id + ".json"), report_to_json(*it->second));
      } else {
        f["status"] = "error";
        f["error"] = frame_errors[id];
        log << "frame " << id << ": " << frame_errors[id] << "\n";
      }
      frames.push_back(f);
    }

    ojson doc;
    doc["command"] = "eval";
    doc["config"] = ojson::parse(config_to_json(cfg));
    doc["frames"] = frames;
    doc["unmatched_pred"] = unmatched_pred;
    doc["unmatched_gt"] = unmatched_gt;
    std::string csv = std::string(kSummaryCsvHeader) + "\n";
    if (!reports.empty()) {
      const DatasetSummary s = aggregate(reports);
      doc["summary"] = summary_json(s);
      csv += summary_csv_line({cfg.dataset, cfg.task, cfg.k, cfg.effective_g(), s}) + "\n";
      log << "mIoU " << percent2(s.miou_mean) << " +/- " << percent2(s.miou_std) << " over "
          << s.n_frames << " frames\n";
    }
    write_text(out_dir / "summary.csv", csv);
    write_text(out_dir / "eval.json", doc.dump(2) + "\n");
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  const std::size_t failed = matched.size() - reports.size() + unmatched_pred.size() +
                             unmatched_gt.size();
  return exit_code(reports.size(), failed);
}

int cmd_sweep(const RunConfig& cfg, const fs::path& features, const fs::path& gt_dir,
              const std::vector<std::uint32_t>& k_list,
              const std::vector<std::uint32_t>& g_list, const fs::path& out_dir,
              std::ostream& log) {
  std::vector<fs::path> files;
  try {
    cfg.validate();
    if (k_list.empty() || g_list.empty()) throw ArgumentError("k and g lists must be non-empty");
    if (std::any_of(k_list.begin(), k_list.end(), [](auto k) { return k < 1; }) ||
        std::any_of(g_list.begin(), g_list.end(), [](auto g) { return g < 1; }))
      throw ArgumentError("k and g values must be positive");
    files = list_feature_files(features);
    if (files.empty()) throw IoError("no FMAP files found in " + features.string());
    if (!fs::is_directory(gt_dir)) throw IoError("not a directory: " + gt_dir.string());
    ensure_dir(out_dir);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  struct Cell {
    std::uint32_t k, g;
  };
  std::vector<Cell> cells;
  for (auto k : k_list)
    for (auto g : g_list) cells.push_back({k, g});
  const std::uint32_t max_g = *std::max_element(g_list.begin(), g_list.end());

  struct FrameResult {
    std::string frame_id;
    std::string error;  // whole-frame failure
    std::vector<std::optional<ContingencyTable>> tables;
    std::vector<std::string> cell_errors;
  };
  std::vector<FrameResult> results(files.size());

  parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
    FrameResult& fr = results[i];
    fr.frame_id = files[i].stem().string();
    fr.tables.resize(cells.size());
    fr.cell_errors.resize(cells.size());
    try {
      const FeatureMap fm = read_feature_map(files[i]);
      const LabelMask gt = read_mask(gt_dir / (fr.frame_id + ".pgm"));
      const NormalizedLaplacian L = build_laplacian(build_affinity(fm), cfg.eps_degree);
      // One decomposition per frame, sliced per g.
      const std::size_t m = std::min<std::size_t>(std::max<std::uint32_t>(max_g, 2), L.size());
      EigenSolverOptions eopts;
      eopts.tol = cfg.eig_tol;
      eopts.seed = cfg.seed;
      const EigenBasis basis = smallest_eigenpairs(L, m, eopts);
      for (std::size_t c = 0; c < cells.size(); ++c) {
        try {
          if (cells[c].g > m)
            throw ArgumentError("g=" + std::to_string(cells[c].g) + " exceeds m=" +
                                std::to_string(m));
          ClusterParams p;
          p.k = cells[c].k;
          p.g = cells[c].g;
          p.seed = cfg.seed;
          const auto low =
              kmeans_cluster(stack_eigenvectors(basis, cells[c].g, fm.height, fm.width), p).labels;
          fr.tables[c] = contingency(upscale(low, gt.height, gt.width, cfg.interp), gt);
        } catch (const std::exception& e) {
          fr.cell_errors[c] = e.what();
        }
      }
    } catch (const std::exception& e) {
      fr.error = e.what();
    }
  });

  std::size_t frames_ok = 0;
  for (const auto& fr : results) {
    if (fr.error.empty()) ++frames_ok;
    else log << "frame " << fr.frame_id << ": " << fr.error << "\n";
  }

  std::string csv = std::string(kSummaryCsvHeader) + ",status\n";
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::string> grid;
  std::size_t cells_ok = 0, cells_bad = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<std::string> ids;
    std::vector<ContingencyTable> tables;
    std::string first_error;
    for (const auto& fr : results) {
      if (!fr.error.empty()) continue;
      if (fr.tables[c]) {
        ids.push_back(fr.frame_id);
        tables.push_back(*fr.tables[c]);
      } else if (first_error.empty()) {
        first_error = fr.frame_id + ": " + fr.cell_errors[c];
      }
    }
    std::string row, status;
    try {
      if (tables.empty()) throw ArgumentError(first_error.empty() ? "no frames" : first_error);
      const auto s = aggregate(evaluate_tables(ids, tables, cfg));
      row = summary_csv_line({cfg.dataset, cfg.task, cells[c].k, cells[c].g, s});
      status = first_error.empty() ? "ok" : "partial: " + first_error;
      grid[{cells[c].k, cells[c].g}] = percent2(s.miou_mean);
      ++(first_error.empty() ? cells_ok : cells_bad);
    } catch (const std::exception& e) {
      row = cfg.dataset + "," + cfg.task + "," + std::to_string(cells[c].k) + "," +
            std::to_string(cells[c].g) + ",,,0";
      status = std::string("error: ") + e.what();
      grid[{cells[c].k, cells[c].g}] = "error";
      ++cells_bad;
    }
    std::replace(status.begin(), status.end(), ',', ';');
    csv += row + "," + status + "\n";
  }

  // k rows by g columns, mIoU in percent.
  std::string table = "task,k";
  for (auto g : g_list) table += ",g=" + std::to_string(g);
  table += "\n";
  for (auto k : k_list) {
    table += cfg.task + "," + std::to_string(k);
    for (auto g : g_list) table += "," + grid[{k, g}];
    table += "\n";
  }

  try {
    write_text(out_dir / "sweep.csv", csv);
    write_text(out_dir / "sweep_grid.csv", table);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  log << "sweep: " << cells_ok << " ok, " << cells_bad << " with errors over " << frames_ok
      << " frames\n";
  if (frames_ok == 0) return kExitFailure;
  return exit_code(cells_ok, cells_bad + (files.size() - frames_ok));
}

int cmd_visualize(const RunConfig& cfg, const fs::path& features,
                  const std::vector<std::uint32_t>& indices, const fs::path& out_dir,
                  std::ostream& log) {
  std::vector<fs::path> files;
  try {
    cfg.validate();
    if (indices.empty()) throw ArgumentError("no eigenvector indices given");
    if (std::any_of(indices.begin(), indices.end(), [](auto i) { return i < 1; }))
      throw ArgumentError("eigenvector indices are 1-based");
    files = list_feature_files(features);
    if (files.empty()) throw IoError("no FMAP files found in " + features.string());
    ensure_dir(out_dir);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  const std::uint32_t max_index = *std::max_element(indices.begin(), indices.end());

  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
    try {
      const FeatureMap fm = read_feature_map(files[i]);
      const NormalizedLaplacian L = build_laplacian(build_affinity(fm), cfg.eps_degree);
      if (max_index > L.size())
        throw ArgumentError("index " + std::to_string(max_index) + " exceeds the " +
                            std::to_string(L.size()) + " available eigenvectors");
      EigenSolverOptions eopts;
      eopts.tol = cfg.eig_tol;
      eopts.seed = cfg.seed;
      const EigenBasis basis =
          smallest_eigenpairs(L, std::max<std::size_t>(max_index, 2), eopts);
      const auto id = files[i].stem().string();
      for (auto idx : indices)
        export_eigenvector_image(basis.vector(idx - 1), fm.height, fm.width,
                                 out_dir / (id + "_eig" + std::to_string(idx) + ".pgm"));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::size_t ok = 0, failed = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (errors[i].empty()) {
      ++ok;
    } else {
      ++failed;
      log << "frame " << files[i].stem().string() << ": " << errors[i] << "\n";
    }
  }
  return exit_code(ok, failed);
}

}  // namespace specseg
