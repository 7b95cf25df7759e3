#include "e2r/config.hpp"

#include <set>

#include <json.hpp>

#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"

namespace e2r {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw Error(ErrorCode::ConfigInvalid, std::string(where) + " must be an object");
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.contains(k)) throw Error(ErrorCode::ConfigInvalid, "unknown key '" + k + "' in " + std::string(where));
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw Error(ErrorCode::ConfigInvalid, std::string(what) + " must be positive");
}

}  // namespace

Config parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  Config c;
  try {
    const auto j = json::parse(json_text);
    check_keys(j, "config",
               {"geometry", "analysis", "prompts", "provider", "library", "store_root", "static_dir", "lexicon",
                "tokenizer", "host", "port", "workers"});
    if (j.contains("geometry")) {
      const auto& g = j["geometry"];
      check_keys(g, "geometry", {"screen_width_px", "screen_height_px", "screen_width_mm", "viewing_distance_mm"});
      read(g, "screen_width_px", c.geometry.screen_width_px);
      read(g, "screen_height_px", c.geometry.screen_height_px);
      read(g, "screen_width_mm", c.geometry.screen_width_mm);
      read(g, "viewing_distance_mm", c.geometry.viewing_distance_mm);
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      check_keys(a, "analysis",
                 {"conf_threshold", "min_fixation_ms", "saccade_velocity_deg_s", "bandwidth_fraction",
                  "max_grid_cells", "roi_threshold", "roi_max", "roi_min_area", "kde_threads", "calibration_gate"});
      read(a, "conf_threshold", c.analysis.conf_threshold);
      if (a.contains("min_fixation_ms")) c.analysis.min_fixation_us = a["min_fixation_ms"].get<std::int64_t>() * 1000;
      read(a, "saccade_velocity_deg_s", c.analysis.saccade_velocity_deg_s);
      read(a, "bandwidth_fraction", c.analysis.bandwidth_fraction);
      read(a, "max_grid_cells", c.analysis.max_grid_cells);
      read(a, "roi_threshold", c.analysis.roi.rel_threshold);
      read(a, "roi_max", c.analysis.roi.max_k);
      read(a, "roi_min_area", c.analysis.roi.min_area_cells);
      read(a, "kde_threads", c.analysis.kde_threads);
      read(a, "calibration_gate", c.analysis.calibration_gate);
    }
    if (j.contains("prompts")) {
      const auto& p = j["prompts"];
      check_keys(p, "prompts", {"focus_threshold", "history_turns"});
      read(p, "focus_threshold", c.prompts.focus_threshold);
      read(p, "history_turns", c.history_turns);
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      check_keys(p, "provider", {"kind", "timeout_ms", "retries", "backoff_ms"});
      if (p.contains("kind")) {
        const auto kind = p["kind"].get<std::string>();
        if (kind == "mock") {
          c.provider = Provider::Mock;
        } else if (kind == "remote") {
          c.provider = Provider::Remote;
        } else {
          throw Error(ErrorCode::ConfigInvalid, "provider.kind must be 'mock' or 'remote', got '" + kind + "'");
        }
      }
      read(p, "timeout_ms", c.provider_timeout_ms);
      read(p, "retries", c.provider_retries);
      read(p, "backoff_ms", c.provider_backoff_ms);
    }
    if (j.contains("library")) c.library_manifest = resolve(base_dir, j["library"].get<std::string>());
    if (j.contains("store_root")) c.store_root = resolve(base_dir, j["store_root"].get<std::string>());
    if (j.contains("static_dir")) c.static_dir = resolve(base_dir, j["static_dir"].get<std::string>());
    if (j.contains("lexicon")) c.lexicon = resolve(base_dir, j["lexicon"].get<std::string>());
    read(j, "tokenizer", c.tokenizer);
    read(j, "host", c.host);
    read(j, "port", c.port);
    read(j, "workers", c.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }

  try {
    c.geometry.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  const auto& a = c.analysis;
  if (a.conf_threshold < 0.0 || a.conf_threshold > 1.0) {
    throw Error(ErrorCode::ConfigInvalid, "analysis.conf_threshold must be in [0, 1]");
  }
  require_positive(static_cast<double>(a.min_fixation_us), "analysis.min_fixation_ms");
  require_positive(a.saccade_velocity_deg_s, "analysis.saccade_velocity_deg_s");
  require_positive(a.bandwidth_fraction, "analysis.bandwidth_fraction");
  require_positive(a.max_grid_cells, "analysis.max_grid_cells");
  require_positive(a.roi.max_k, "analysis.roi_max");
  require_positive(a.roi.min_area_cells, "analysis.roi_min_area");
  require_positive(a.kde_threads, "analysis.kde_threads");
  require_positive(a.calibration_gate, "analysis.calibration_gate");
  if (a.roi.rel_threshold <= 0.0 || a.roi.rel_threshold > 1.0) {
    throw Error(ErrorCode::ConfigInvalid, "analysis.roi_threshold must be in (0, 1]");
  }
  if (c.prompts.focus_threshold < 0.0 || c.prompts.focus_threshold > 1.0) {
    throw Error(ErrorCode::ConfigInvalid, "prompts.focus_threshold must be in [0, 1]");
  }
  require_positive(c.history_turns, "prompts.history_turns");
  require_positive(static_cast<double>(c.provider_timeout_ms), "provider.timeout_ms");
  if (c.provider_retries < 0) throw Error(ErrorCode::ConfigInvalid, "provider.retries must be >= 0");
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::ConfigInvalid, "port out of range");
  require_positive(c.workers, "workers");
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigInvalid, "cannot read config file " + path.string());
  }
  return parse_config(text, path.parent_path());
}

std::string to_json(const Config& c) {
  json j;
  j["geometry"] = {{"screen_width_px", c.geometry.screen_width_px},
                   {"screen_height_px", c.geometry.screen_height_px},
                   {"screen_width_mm", c.geometry.screen_width_mm},
                   {"viewing_distance_mm", c.geometry.viewing_distance_mm}};
  j["analysis"] = {{"conf_threshold", c.analysis.conf_threshold},
                   {"min_fixation_ms", c.analysis.min_fixation_us / 1000},
                   {"saccade_velocity_deg_s", c.analysis.saccade_velocity_deg_s},
                   {"bandwidth_fraction", c.analysis.bandwidth_fraction},
                   {"max_grid_cells", c.analysis.max_grid_cells},
                   {"roi_threshold", c.analysis.roi.rel_threshold},
                   {"roi_max", c.analysis.roi.max_k},
                   {"roi_min_area", c.analysis.roi.min_area_cells},
                   {"kde_threads", c.analysis.kde_threads},
                   {"calibration_gate", c.analysis.calibration_gate}};
  j["prompts"] = {{"focus_threshold", c.prompts.focus_threshold}, {"history_turns", c.history_turns}};
  j["provider"] = {{"kind", c.provider == Provider::Mock ? "mock" : "remote"},
                   {"timeout_ms", c.provider_timeout_ms},
                   {"retries", c.provider_retries},
                   {"backoff_ms", c.provider_backoff_ms}};
  j["library"] = c.library_manifest.string();
  j["store_root"] = c.store_root.string();
  j["static_dir"] = c.static_dir.string();
  j["lexicon"] = c.lexicon.string();
  j["tokenizer"] = c.tokenizer;
  j["host"] = c.host;
  j["port"] = c.port;
  j["workers"] = c.workers;
  return j.dump(2);
}

RemoteConfig remote_config(const Config& config) {
  auto r = RemoteConfig::from_env();
  r.timeout = std::chrono::milliseconds(config.provider_timeout_ms);
  r.retries = config.provider_retries;
  r.backoff = std::chrono::milliseconds(config.provider_backoff_ms);
  return r;
}

}  // namespace e2r
