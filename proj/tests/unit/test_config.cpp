#include <doctest.h>

#include "e2r/config.hpp"
#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"
#include "helpers.hpp"

using namespace e2r;

namespace {

ErrorCode parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error for " << text);
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const auto c = parse_config("{}");
    CHECK(c.geometry.screen_width_px == 5120);
    CHECK(c.analysis.conf_threshold == 0.6);
    CHECK(c.analysis.min_fixation_us == 300'000);
    CHECK(c.analysis.saccade_velocity_deg_s == 20.0);
    CHECK(c.analysis.bandwidth_fraction == 0.05);
    CHECK(c.analysis.max_grid_cells == 512);
    CHECK(c.analysis.roi.rel_threshold == 0.6);
    CHECK(c.analysis.roi.max_k == 5);
    CHECK(c.analysis.roi.min_area_cells == 4);
    CHECK(c.prompts.focus_threshold == 0.5);
    CHECK(c.history_turns == 10);
    CHECK(c.provider == Provider::Mock);
    CHECK(c.port == 8080);
  }

  TEST_CASE("values and relative paths") {
    const auto c = parse_config(R"({
      "geometry": {"screen_width_px": 1920, "screen_height_px": 1080, "screen_width_mm": 520, "viewing_distance_mm": 650},
      "analysis": {"min_fixation_ms": 200, "roi_max": 3, "kde_threads": 2},
      "prompts": {"focus_threshold": 0.7, "history_turns": 6},
      "provider": {"kind": "remote", "timeout_ms": 5000, "retries": 1},
      "library": "photos/library.json", "store_root": "/var/e2r", "port": 0, "tokenizer": "char-2gram"
    })", "/etc/e2r");
    CHECK(c.geometry.screen_width_px == 1920);
    CHECK(c.analysis.min_fixation_us == 200'000);
    CHECK(c.analysis.roi.max_k == 3);
    CHECK(c.prompts.focus_threshold == 0.7);
    CHECK(c.history_turns == 6);
    CHECK(c.provider == Provider::Remote);
    CHECK(c.provider_timeout_ms == 5000);
    CHECK(c.library_manifest == std::filesystem::path("/etc/e2r/photos/library.json"));
    CHECK(c.store_root == std::filesystem::path("/var/e2r"));
    CHECK(c.port == 0);
  }

  TEST_CASE("rejections") {
    CHECK(parse_error("{") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"prot": 80})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"analysis": {"bandwith_fraction": 0.1}})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"analysis": {"conf_threshold": 1.5}})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"analysis": {"bandwidth_fraction": 0}})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"analysis": {"roi_threshold": 0}})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"geometry": {"viewing_distance_mm": -1}})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"provider": {"kind": "cloud"}})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"port": 70000})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"port": "eighty"})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"({"workers": 0})") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"([1])") == ErrorCode::ConfigInvalid);
  }

  TEST_CASE("round trip and files") {
    testutil::TempDir dir;
    auto c = parse_config(R"({"analysis": {"roi_max": 4}, "port": 9000, "library": "lib.json"})", dir.path());
    write_atomic(dir / "e2r.json", to_json(c));
    const auto back = load_config(dir / "e2r.json");
    CHECK(back.analysis.roi.max_k == 4);
    CHECK(back.port == 9000);
    CHECK(back.library_manifest == dir / "lib.json");
    CHECK(back.store_root == dir / "sessions");
    try {
      load_config(dir / "missing.json");
      FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigInvalid);
    }
  }

  TEST_CASE("remote settings come from the environment") {
    ::unsetenv("E2R_LLM_ENDPOINT");
    Config c;
    CHECK_THROWS_AS(remote_config(c), Error);
    ::setenv("E2R_LLM_ENDPOINT", "http://localhost:1/v1/chat/completions", 1);
    c.provider_timeout_ms = 1234;
    c.provider_retries = 5;
    const auto r = remote_config(c);
    CHECK(r.timeout == std::chrono::milliseconds(1234));
    CHECK(r.retries == 5);
    ::unsetenv("E2R_LLM_ENDPOINT");
  }
}
