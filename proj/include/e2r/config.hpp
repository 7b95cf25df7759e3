#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "e2r/agent.hpp"
#include "e2r/attention_map.hpp"
#include "e2r/gaze.hpp"

namespace e2r {

struct AnalysisConfig {
  double conf_threshold = 0.6;
  std::int64_t min_fixation_us = 300'000;
  double saccade_velocity_deg_s = 20.0;
  double bandwidth_fraction = kDefaultBandwidthFraction;
  int max_grid_cells = kMaxGridCells;
  RoiOptions roi;
  int kde_threads = 1;
  double calibration_gate = 0.02;  // RMSE limit as a fraction of screen width
};

struct Config {
  ViewingGeometry geometry;
  AnalysisConfig analysis;
  PromptConfig prompts;
  int history_turns = kDefaultHistoryTurns;

  Provider provider = Provider::Mock;
  std::int64_t provider_timeout_ms = 30'000;
  int provider_retries = 2;
  std::int64_t provider_backoff_ms = 500;

  std::filesystem::path library_manifest;
  std::filesystem::path store_root = "sessions";
  std::filesystem::path static_dir;
  std::filesystem::path lexicon;
  std::string tokenizer = "unicode-word";
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
};

// Relative paths resolve against `base_dir`. Unknown keys are rejected so
// typos do not silently fall back to defaults. Throws ConfigInvalid.
Config parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);
std::string to_json(const Config& config);

// Provider settings with endpoint/model/key taken from the environment.
RemoteConfig remote_config(const Config& config);

}  // namespace e2r
