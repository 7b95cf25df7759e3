#include <doctest.h>

#include <fstream>

#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"
#include "e2r/store.hpp"
#include "helpers.hpp"
#include "session_fixture.hpp"

using namespace e2r;

namespace {

void overwrite_line(const std::filesystem::path& file, std::size_t index, const std::string& line) {
  auto lines = read_lines(file);
  lines.at(index) = line;
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  write_atomic(file, out);
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("layout and manifest round trip") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    SessionStore store(dir / "sessions");
    SessionManifest m;
    m.session_id = "s1";
    m.seed = 42;
    m.photos = lib;
    m.photo_order = start_session(lib.photos, 42).photo_order;
    m.gaze_space = GazeSpace::Photo;
    m.config_json = to_json(Config{});
    m.created_unix_s = 1700000000;
    store.create(m);
    for (const char* f : {"manifest.json", "events.jsonl", "transcript.jsonl", "audit.jsonl"}) {
      CHECK(std::filesystem::is_regular_file(store.session_dir("s1") / f));
    }
    CHECK(std::filesystem::is_directory(store.session_dir("s1") / "gaze"));
    CHECK(std::filesystem::is_directory(store.heatmap_dir("s1")));
    CHECK(store.exists("s1"));
    CHECK(store.list() == std::vector<std::string>{"s1"});
    CHECK_THROWS_AS(store.create(m), Error);

    const auto back = store.manifest("s1");
    CHECK(back.seed == 42);
    CHECK(back.gaze_space == GazeSpace::Photo);
    CHECK(back.photo_order == m.photo_order);
    CHECK(back.prompt_version == std::string(kPromptTemplateVersion));
    CHECK(back.photos.photos.size() == 5);
    CHECK(back.photos.find("childhood")->annotated_regions.size() == 2);
    CHECK(back.created_unix_s == 1700000000);
    CHECK(parse_config(back.config_json).port == 8080);
  }

  TEST_CASE("ids are validated and missing sessions are NotFound") {
    testutil::TempDir dir;
    SessionStore store(dir.path());
    CHECK_THROWS_AS(store.session_dir("../escape"), Error);
    CHECK_THROWS_AS(store.session_dir(""), Error);
    CHECK_FALSE(store.exists("../x"));
    try {
      store.manifest("nope");
      FAIL("expected NotFound");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotFound);
    }
  }

  TEST_CASE("unwritable root") {
    try {
      SessionStore store("/proc/e2r-store");
      FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigInvalid);
    }
  }

  TEST_CASE("logs append and read back") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    SessionStore store(dir / "sessions");
    const auto state = fixture::record_mock_session(store, lib, 3, "sess");
    const auto t = store.transcript("sess");
    CHECK(t == state.transcript);
    const auto events = store.events("sess");
    CHECK(std::count_if(events.begin(), events.end(), [](const auto& e) { return e.kind == EventKind::AgentReplied; }) == 15);
    const auto audit = read_lines(store.audit_path("sess"));
    CHECK(audit.size() == 15);

    std::vector<ScreenGazePoint> pts{testutil::pt(0, 1, 2), testutil::pt(10, 3, 4)};
    store.append_gaze("sess", "childhood", pts);
    store.append_gaze("sess", "childhood", pts);
    CHECK(read_lines(store.gaze_path("sess", "childhood")).size() == 4);
  }

  TEST_CASE("restore equals the live state") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    SessionStore store(dir / "sessions");
    const auto state = fixture::record_mock_session(store, lib, 11, "r");
    CHECK(restore_state(store.manifest("r"), store.events("r")) == state);
  }

  TEST_CASE("replay of an untouched session is identical") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    SessionStore store(dir / "sessions");
    Config config;
    config.history_turns = 4;
    config.prompts.focus_threshold = 0.9;
    for (std::uint64_t seed : {1u, 2u, 99u}) {
      const auto id = "p" + std::to_string(seed);
      const auto state = fixture::record_mock_session(store, lib, seed, id, config);
      const auto v = replay_session(store.session_dir(id));
      CHECK(v.identical);
      CHECK(v.to_string() == "identical");
      CHECK(v.transcript == state.transcript);
    }
  }

  TEST_CASE("tampered transcript diverges at that seq") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    SessionStore store(dir / "sessions");
    fixture::record_mock_session(store, lib, 5, "t");
    const auto file = store.session_dir("t") / "transcript.jsonl";
    auto line = read_lines(file).at(6);
    line[line.find("\"text\":\"") + 8] ^= 0x01;
    overwrite_line(file, 6, line);
    const auto v = replay_session(store.session_dir("t"));
    CHECK_FALSE(v.identical);
    CHECK(v.diverged_seq == std::optional<std::int64_t>(7));
    CHECK(v.to_string() == "diverged(7)");
  }

  TEST_CASE("truncated transcript diverges after its last line") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    SessionStore store(dir / "sessions");
    fixture::record_mock_session(store, lib, 6, "t");
    const auto file = store.session_dir("t") / "transcript.jsonl";
    auto lines = read_lines(file);
    lines.resize(20);
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    write_atomic(file, out);
    CHECK(replay_session(store.session_dir("t")).to_string() == "diverged(21)");
  }

  TEST_CASE("remote sessions are not replayable") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    SessionStore store(dir / "sessions");
    SessionManifest m;
    m.session_id = "remote";
    m.provider = Provider::Remote;
    m.photos = lib;
    m.photo_order = start_session(lib.photos, 0).photo_order;
    store.create(m);
    try {
      replay_session(store.session_dir("remote"));
      FAIL("expected NotReplayable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotReplayable);
    }
  }
}
