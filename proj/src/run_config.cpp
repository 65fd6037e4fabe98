#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "specseg/commands.hpp"
#include "specseg/error.hpp"

namespace specseg {

using nlohmann::json;

void RunConfig::validate() const {
  if (k < 2) throw ArgumentError("k must be at least 2");
  if (effective_g() < 1) throw ArgumentError("g must be at least 1");
  if (std::isnan(tau)) throw ArgumentError("tau must not be NaN");
  if (!(eps_degree > 0.0)) throw ArgumentError("eps-degree must be positive");
  if (!(eig_tol > 0.0)) throw ArgumentError("eig-tol must be positive");
  if (workers < 1) throw ArgumentError("workers must be at least 1");
  if ((out_height == 0) != (out_width == 0))
    throw ArgumentError("height and width must be given together");
}

std::string to_string(SegmentMode m) { return m == SegmentMode::kSalient ? "salient" : "cluster"; }

std::string to_string(Interpolation m) {
  return m == Interpolation::kMajority ? "majority" : "nearest-exact";
}

std::string to_string(MatchSetting m) {
  switch (m) {
    case MatchSetting::kHungarian: return "hungarian";
    case MatchSetting::kMajority: return "majority";
    default: return "auto";
  }
}

std::string to_string(MatchScope m) { return m == MatchScope::kDataset ? "dataset" : "frame"; }

SegmentMode parse_segment_mode(std::string_view s) {
  if (s == "cluster") return SegmentMode::kCluster;
  if (s == "salient") return SegmentMode::kSalient;
  throw ArgumentError("unknown mode '" + std::string(s) + "' (cluster|salient)");
}

Interpolation parse_interpolation(std::string_view s) {
  if (s == "nearest-exact") return Interpolation::kNearestExact;
  if (s == "majority") return Interpolation::kMajority;
  throw ArgumentError("unknown interp '" + std::string(s) + "' (nearest-exact|majority)");
}

MatchSetting parse_match_setting(std::string_view s) {
  if (s == "auto") return MatchSetting::kAuto;
  if (s == "hungarian") return MatchSetting::kHungarian;
  if (s == "majority") return MatchSetting::kMajority;
  throw ArgumentError("unknown match-mode '" + std::string(s) + "' (auto|hungarian|majority)");
}

MatchScope parse_match_scope(std::string_view s) {
  if (s == "frame") return MatchScope::kFrame;
  if (s == "dataset") return MatchScope::kDataset;
  throw ArgumentError("unknown match-scope '" + std::string(s) + "' (frame|dataset)");
}

void merge_config_json(RunConfig& cfg, std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");

  for (const auto& [raw_key, v] : j.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '-', '_');
    try {
      if (key == "mode") cfg.mode = parse_segment_mode(v.get<std::string>());
      else if (key == "k") cfg.k = v.get<std::uint32_t>();
      else if (key == "g") {
        if (v.is_null()) cfg.g.reset();
        else cfg.g = v.get<std::uint32_t>();
      }
      else if (key == "tau") cfg.tau = v.get<double>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "interp") cfg.interp = parse_interpolation(v.get<std::string>());
      else if (key == "height") cfg.out_height = v.get<std::uint32_t>();
      else if (key == "width") cfg.out_width = v.get<std::uint32_t>();
      else if (key == "eps_degree") cfg.eps_degree = v.get<double>();
      else if (key == "eig_tol") cfg.eig_tol = v.get<double>();
      else if (key == "match_mode") cfg.match_mode = parse_match_setting(v.get<std::string>());
      else if (key == "match_scope") cfg.match_scope = parse_match_scope(v.get<std::string>());
      else if (key == "foreground_only") cfg.foreground_only = v.get<bool>();
      else if (key == "workers") cfg.workers = v.get<unsigned>();
      else if (key == "out_dir") cfg.out_dir = v.get<std::string>();
      else if (key == "record_timings") cfg.record_timings = v.get<bool>();
      else if (key == "dataset") cfg.dataset = v.get<std::string>();
      else if (key == "task") cfg.task = v.get<std::string>();
      else throw ArgumentError("unknown config key '" + raw_key + "'");
    } catch (const json::exception& e) {
      throw ArgumentError("config key '" + raw_key + "' has the wrong type: " + e.what());
    }
  }
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  const auto bytes = read_file_bytes(path);
  merge_config_json(base, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                           bytes.size()));
  return base;
}

std::string config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(cfg.mode);
  j["k"] = cfg.k;
  j["g"] = cfg.effective_g();
  j["tau"] = cfg.tau;
  j["seed"] = cfg.seed;
  j["interp"] = to_string(cfg.interp);
  j["height"] = cfg.out_height;
  j["width"] = cfg.out_width;
  j["eps_degree"] = cfg.eps_degree;
  j["eig_tol"] = cfg.eig_tol;
  j["match_mode"] = to_string(cfg.match_mode);
  j["match_scope"] = to_string(cfg.match_scope);
  j["foreground_only"] = cfg.foreground_only;
  j["dataset"] = cfg.dataset;
  j["task"] = cfg.task;
  return j.dump();
}

}  // namespace specseg
