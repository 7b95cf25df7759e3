#include <doctest.h>

#include "e2r/error.hpp"
#include "e2r/session.hpp"
#include "helpers.hpp"

using namespace e2r;

namespace {

std::vector<PhotoRecord> photos() {
  std::vector<PhotoRecord> out;
  const std::pair<const char*, Theme> expected[] = {{"trip", Theme::TripOfALifetime},
                                                {"child", Theme::Childhood},
                                                {"events", Theme::LifeEvents},
                                                {"child2", Theme::Childhood},
                                                {"heritage", Theme::CulturalHeritage}};
  for (const auto& [id, theme] : expected) {
    PhotoRecord p;
    p.photo_id = id;
    p.theme = theme;
    p.size = {100, 100};
    out.push_back(p);
  }
  return out;
}

SessionEvent ev(EventKind k, std::string text = {}, std::int64_t t = 0) { return {k, std::move(text), t, {}}; }

ErrorCode code_of(const SessionState& s, const SessionEvent& e) {
  try {
    step(s, e);
  } catch (const Error& err) {
    return err.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

// Drives one photo through narration and two question rounds.
SessionState run_photo(SessionState s, std::int64_t t) {
  s = step(s, ev(EventKind::ViewingDone, {}, t));
  s = step(s, ev(EventKind::AgentReplied, "narration", t + 1));
  for (int r = 0; r < 2; ++r) {
    s = step(s, ev(EventKind::AgentReplied, "question?", t + 2 + r));
    s = step(s, ev(EventKind::UserReplied, "answer", t + 3 + r));
  }
  return s;
}

}  // namespace

TEST_SUITE("session") {
  TEST_CASE("photos are ordered by theme, stable within a theme") {
    const auto s = start_session(photos(), 9, "x");
    std::vector<std::string> ids;
    for (const auto& p : s.photo_order) ids.push_back(p.photo_id);
    CHECK(ids == std::vector<std::string>{"child", "child2", "heritage", "trip", "events"});
    CHECK(s.phase == Phase::Calibration);
    CHECK(s.rng_seed == 9);
    CHECK_THROWS_AS(start_session(std::vector<PhotoRecord>{}, 1), Error);
  }

  TEST_CASE("calibration then viewing") {
    const auto s = step(start_session(photos(), 1), ev(EventKind::CalibrationDone));
    CHECK(s.phase == Phase::Viewing);
    CHECK(s.photo_index == 0);
  }

  TEST_CASE("illegal transitions name phase and event") {
    const auto s = start_session(photos(), 1);
    CHECK(code_of(s, ev(EventKind::UserReplied, "hi")) == ErrorCode::IllegalTransition);
    try {
      step(s, ev(EventKind::UserReplied, "hi"));
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("UserReplied") != std::string::npos);
      CHECK(msg.find("Calibration") != std::string::npos);
    }
    auto v = step(s, ev(EventKind::CalibrationDone));
    CHECK(code_of(v, ev(EventKind::CalibrationDone)) == ErrorCode::IllegalTransition);
    CHECK(code_of(v, ev(EventKind::AgentReplied, "x")) == ErrorCode::IllegalTransition);
    auto n = step(v, ev(EventKind::ViewingDone));
    CHECK(code_of(n, ev(EventKind::UserReplied, "x")) == ErrorCode::IllegalTransition);
    CHECK(code_of(n, ev(EventKind::AgentReplied, "")) == ErrorCode::IllegalTransition);
    auto q = step(n, ev(EventKind::AgentReplied, "story"));
    CHECK(q.phase == Phase::QuestionRound);
    CHECK(q.round == 1);
    CHECK(agent_turn(q));
    q = step(q, ev(EventKind::AgentReplied, "question?"));
    CHECK(code_of(q, ev(EventKind::AgentReplied, "again?")) == ErrorCode::IllegalTransition);
  }

  TEST_CASE("full walk reaches Completed after the last round") {
    auto s = step(start_session(photos(), 1), ev(EventKind::CalibrationDone));
    for (int i = 0; i < 5; ++i) {
      CHECK(s.phase == Phase::Viewing);
      CHECK(s.photo_index == i);
      s = run_photo(s, i * 100);
    }
    CHECK(s.phase == Phase::Completed);
    CHECK(s.transcript.size() == 25);
    for (std::size_t i = 0; i < s.transcript.size(); ++i) CHECK(s.transcript[i].seq == static_cast<std::int64_t>(i + 1));
    CHECK(s.transcript[0].round == 0);
    CHECK(s.transcript[1].round == 1);
    CHECK(s.transcript[4].round == 2);
    CHECK(code_of(s, ev(EventKind::SkipPhoto)) == ErrorCode::IllegalTransition);
    const auto j = nlohmann::json::parse(state_summary_json(s));
    CHECK(j["phase"] == "Completed");
    CHECK_FALSE(j.contains("current_photo"));
  }

  TEST_CASE("skip moves to the next photo from any active phase") {
    auto s = step(start_session(photos(), 1), ev(EventKind::CalibrationDone));
    s = step(s, ev(EventKind::SkipPhoto));
    CHECK(s.photo_index == 1);
    CHECK(s.phase == Phase::Viewing);
    s = step(s, ev(EventKind::ViewingDone));
    s = step(s, ev(EventKind::AgentReplied, "story"));
    s = step(s, ev(EventKind::SkipPhoto));
    CHECK(s.photo_index == 2);
    CHECK(s.skipped_photos == std::vector<std::string>{"child", "child2"});
    CHECK(s.round == 0);
    CHECK(s.current_artifacts == ViewingArtifacts{});
  }

  TEST_CASE("step is pure") {
    auto s = step(start_session(photos(), 3), ev(EventKind::CalibrationDone));
    SessionEvent v = ev(EventKind::ViewingDone, {}, 5);
    v.artifacts.rois = {{1, "Television", 0.8}, {2, std::nullopt, 0.2}};
    v.artifacts.focus = 0.8;
    const auto a = step(s, v), b = step(s, v);
    CHECK(a == b);
    CHECK(a.current_artifacts == v.artifacts);
    CHECK(s.phase == Phase::Viewing);
  }

  TEST_CASE("photo index and theme order never decrease") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      auto s = step(start_session(photos(), trial), ev(EventKind::CalibrationDone));
      int last_index = 0, last_theme = 0;
      while (s.phase != Phase::Completed) {
        const int r = static_cast<int>(rng() % 10);
        SessionEvent e;
        if (r == 0) {
          e = ev(EventKind::SkipPhoto);
        } else if (s.phase == Phase::Viewing) {
          e = ev(EventKind::ViewingDone);
        } else if (agent_turn(s)) {
          e = ev(EventKind::AgentReplied, "a?");
        } else {
          e = ev(EventKind::UserReplied, "u");
        }
        s = step(s, e);
        CHECK(s.photo_index >= last_index);
        CHECK(s.round <= 2);
        if (s.phase != Phase::Completed) {
          CHECK(static_cast<int>(s.current_photo().theme) >= last_theme);
          last_theme = static_cast<int>(s.current_photo().theme);
        }
        last_index = s.photo_index;
      }
    }
  }

  TEST_CASE("prompt constants") {
    PhotoRecord p;
    p.photo_id = "childhood";
    p.theme = Theme::Childhood;
    p.era = "1970s";
    const auto n = build_narration_prompt(p);
    CHECK(n.kind == PromptKind::Narration);
    CHECK(n.creativity == 1.0);
    CHECK(n.response_length == 600);
    CHECK(n.system_text.find("Childhood") != std::string::npos);
    CHECK(n.system_text.find("1970s") != std::string::npos);
    CHECK_FALSE(n.photo.present);

    const std::vector<RoiDigest> rois{{1, "Television", 0.8}, {2, "Decoration", 0.2}};
    const auto q = build_question_prompt(p, rois, 0.8, 1);
    CHECK(q.creativity == 0.5);
    CHECK(q.response_length == 200);
    CHECK(q.target_label == std::optional<std::string>("Television"));
    CHECK(q.system_text.find("Ask about the Television") != std::string::npos);
    CHECK(q.system_text.find("no more than 2 questions") != std::string::npos);
    CHECK(q.roi_summary == "1. Television (0.80); 2. Decoration (0.20)");
    CHECK_THROWS_AS(build_question_prompt(p, rois, 0.8, 3), Error);
  }

  TEST_CASE("diffuse attention asks a general question") {
    PhotoRecord p;
    p.photo_id = "x";
    std::vector<RoiDigest> six;
    for (int i = 1; i <= 6; ++i) six.push_back({i, "Item" + std::to_string(i), 1.0 / 6});
    const auto q = build_question_prompt(p, six, 0.17, 2);
    CHECK_FALSE(q.target_label);
    CHECK(q.system_text.find("more general question") != std::string::npos);
    const auto empty = build_question_prompt(p, {}, 0.0, 1);
    CHECK_FALSE(empty.target_label);
    CHECK(empty.roi_summary == "No distinct regions of interest were detected.");
    // Unlabeled top ROI cannot be targeted even when focused.
    const std::vector<RoiDigest> unlabeled{{1, std::nullopt, 0.9}};
    CHECK_FALSE(build_question_prompt(p, unlabeled, 0.9, 1).target_label);
    // Threshold is inclusive and configurable.
    const std::vector<RoiDigest> tv{{1, "Television", 0.5}};
    CHECK(build_question_prompt(p, tv, 0.5, 1).target_label);
    CHECK_FALSE(build_question_prompt(p, tv, 0.5, 1, {0.6}).target_label);
  }

  TEST_CASE("record round trips") {
    const Utterance u{3, Speaker::User, "We had a \"Panda\" set\nat home", 42, "childhood", 2};
    const auto line = to_json_line(u);
    CHECK(line.back() == '\n');
    CHECK(std::count(line.begin(), line.end(), '\n') == 1);
    CHECK(utterance_from_json(line) == u);
    CHECK_THROWS_AS(utterance_from_json("{\"seq\":1}"), Error);

    SessionEvent e = ev(EventKind::ViewingDone, {}, 7);
    e.artifacts.rois = {{1, "Television", 0.75}, {2, std::nullopt, 0.25}};
    e.artifacts.focus = 0.75;
    e.artifacts.heatmap_path = "heatmaps/childhood.overlay.png";
    CHECK(event_from_json(to_json_line(e)) == e);
    const auto r = ev(EventKind::UserReplied, "", 9);
    CHECK(event_from_json(to_json_line(r)) == r);
    CHECK_THROWS_AS(event_from_json("{\"kind\":\"Dance\"}"), Error);
  }
}
