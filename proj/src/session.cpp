#include "e2r/session.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "e2r/error.hpp"

namespace e2r {

using nlohmann::json;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Calibration: return "Calibration";
    case Phase::Viewing: return "Viewing";
    case Phase::Narration: return "Narration";
    case Phase::QuestionRound: return "QuestionRound";
    case Phase::Advancing: return "Advancing";
    case Phase::Completed: return "Completed";
  }
  return "";
}

std::string_view to_string(Speaker s) { return s == Speaker::Agent ? "agent" : "user"; }

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::CalibrationDone: return "CalibrationDone";
    case EventKind::ViewingDone: return "ViewingDone";
    case EventKind::AgentReplied: return "AgentReplied";
    case EventKind::UserReplied: return "UserReplied";
    case EventKind::SkipPhoto: return "SkipPhoto";
  }
  return "";
}

std::optional<Phase> parse_phase(std::string_view s) {
  for (auto p : {Phase::Calibration, Phase::Viewing, Phase::Narration, Phase::QuestionRound, Phase::Advancing,
                 Phase::Completed}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (auto k : {EventKind::CalibrationDone, EventKind::ViewingDone, EventKind::AgentReplied, EventKind::UserReplied,
                 EventKind::SkipPhoto}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::vector<RoiDigest> digest(std::span<const RegionOfInterest> rois) {
  std::vector<RoiDigest> out;
  out.reserve(rois.size());
  for (const auto& r : rois) out.push_back({r.rank, r.label, r.mass});
  return out;
}

SessionState start_session(std::span<const PhotoRecord> photos, std::uint64_t seed, std::string session_id) {
  if (photos.empty()) throw Error(ErrorCode::EmptyLibrary, "session needs at least one photo");
  SessionState s;
  s.session_id = std::move(session_id);
  s.rng_seed = seed;
  for (const auto& p : photos) s.photo_order.push_back({p.photo_id, p.theme});
  std::stable_sort(s.photo_order.begin(), s.photo_order.end(), [](const PhotoSlot& a, const PhotoSlot& b) {
    return static_cast<int>(a.theme) < static_cast<int>(b.theme);
  });
  return s;
}

bool agent_turn(const SessionState& state) {
  return (state.phase == Phase::Narration || state.phase == Phase::QuestionRound) &&
         state.awaiting == Speaker::Agent;
}

namespace {

[[noreturn]] void illegal(const SessionState& s, const SessionEvent& e, std::string_view detail = {}) {
  std::string msg = "event " + std::string(to_string(e.kind)) + " not allowed in phase " +
                    std::string(to_string(s.phase));
  if (!detail.empty()) msg += " (" + std::string(detail) + ")";
  throw Error(ErrorCode::IllegalTransition, msg);
}

void append(SessionState& s, Speaker who, const SessionEvent& e) {
  Utterance u;
  u.seq = s.next_seq();
  u.speaker = who;
  u.text = e.text;
  u.timestamp_us = e.t_us;
  u.photo_id = s.current_photo().photo_id;
  u.round = s.round;
  s.transcript.push_back(std::move(u));
}

// Advancing is transient: it resolves to the next Viewing or to Completed
// within the same step.
void advance(SessionState& s) {
  s.phase = Phase::Advancing;
  s.round = 0;
  s.awaiting = Speaker::Agent;
  s.current_artifacts = {};
  if (s.photo_index + 1 < static_cast<int>(s.photo_order.size())) {
    ++s.photo_index;
    s.phase = Phase::Viewing;
  } else {
    s.phase = Phase::Completed;
  }
}

}  // namespace

SessionState step(const SessionState& state, const SessionEvent& event) {
  SessionState s = state;
  switch (event.kind) {
    case EventKind::CalibrationDone:
      if (s.phase != Phase::Calibration) illegal(s, event);
      s.phase = Phase::Viewing;
      s.photo_index = 0;
      s.round = 0;
      return s;

    case EventKind::ViewingDone:
      if (s.phase != Phase::Viewing) illegal(s, event);
      s.phase = Phase::Narration;
      s.awaiting = Speaker::Agent;
      s.current_artifacts = event.artifacts;
      return s;

    case EventKind::AgentReplied:
      if (!agent_turn(s)) illegal(s, event, "not the agent's turn");
      if (event.text.empty()) illegal(s, event, "empty agent reply");
      append(s, Speaker::Agent, event);
      if (s.phase == Phase::Narration) {
        s.phase = Phase::QuestionRound;
        s.round = 1;
        s.awaiting = Speaker::Agent;
      } else {
        s.awaiting = Speaker::User;
      }
      return s;

    case EventKind::UserReplied:
      if (s.phase != Phase::QuestionRound || s.awaiting != Speaker::User) illegal(s, event, "no pending question");
      append(s, Speaker::User, event);
      if (s.round < 2) {
        ++s.round;
        s.awaiting = Speaker::Agent;
      } else {
        advance(s);
      }
      return s;

    case EventKind::SkipPhoto:
      if (s.phase != Phase::Viewing && s.phase != Phase::Narration && s.phase != Phase::QuestionRound) {
        illegal(s, event);
      }
      s.skipped_photos.push_back(s.current_photo().photo_id);
      advance(s);
      return s;
  }
  illegal(s, event);
}

// ---------------------------------------------------------------------------

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

Attachment photo_attachment(const PhotoRecord& photo) {
  Attachment a;
  a.path = photo.image_path;
  const auto ext = photo.image_path.extension().string();
  a.media_type = ext == ".pgm" ? "image/x-portable-graymap" : "image/png";
  std::error_code ec;
  a.present = !photo.image_path.empty() && std::filesystem::is_regular_file(photo.image_path, ec);
  return a;
}

}  // namespace

std::string roi_summary_text(std::span<const RoiDigest> rois) {
  if (rois.empty()) return "No distinct regions of interest were detected.";
  std::string out;
  for (const auto& r : rois) {
    if (!out.empty()) out += "; ";
    out += std::to_string(r.rank) + ". " + r.label.value_or("unlabeled area") + " (" + fixed2(r.mass) + ")";
  }
  return out;
}

PromptSpec build_narration_prompt(const PhotoRecord& photo) {
  PromptSpec p;
  p.kind = PromptKind::Narration;
  p.creativity = kNarrationCreativity;
  p.response_length = kNarrationLength;
  p.photo_id = photo.photo_id;
  p.theme = photo.theme;
  p.photo = photo_attachment(photo);
  const std::string era = photo.era.empty() ? "unknown" : photo.era;
  p.system_text =
      "You are a warm, patient companion guiding an older adult through a reminiscence session with historical "
      "photographs. A photo from the theme \"" + std::string(theme_display(photo.theme)) + "\" (era: " + era +
      ") is now on screen. Summarise what the photo shows and give basic background details about the period, "
      "so that it can serve as an external memory cue and introduce the conversation that follows. Use plain, "
      "friendly sentences that take one to two minutes to read aloud. Do not ask any questions yet.";
  return p;
}

PromptSpec build_question_prompt(const PhotoRecord& photo, std::span<const RoiDigest> rois, double focus, int round,
                                 const PromptConfig& config) {
  if (round != 1 && round != 2) throw Error(ErrorCode::InvalidArgument, "question round must be 1 or 2");
  PromptSpec p;
  p.kind = PromptKind::Question;
  p.creativity = kQuestionCreativity;
  p.response_length = kQuestionLength;
  p.photo_id = photo.photo_id;
  p.theme = photo.theme;
  p.round = round;
  p.photo = photo_attachment(photo);
  p.roi_summary = roi_summary_text(rois);
  p.focus = focus;

  const RoiDigest* top = nullptr;
  for (const auto& r : rois) {
    if (r.rank == 1) top = &r;
  }
  if (top && top->label && focus >= config.focus_threshold) p.target_label = top->label;

  std::string text =
      "You are continuing a reminiscence conversation about the photo on screen (theme: \"" +
      std::string(theme_display(photo.theme)) + "\"). Eye-tracking shows where the user looked. Regions of interest "
      "ranked by attention: " + p.roi_summary + " Focus index: " + fixed2(focus) + ". ";
  if (p.target_label) {
    text += "The user's attention is concentrated on \"" + *p.target_label + "\". Ask about the " + *p.target_label +
            " and connect it to the user's own memories and experiences. ";
  } else {
    text += "The user's attention is spread across the photo. Ask a more general question: whether anything in the "
            "photo feels familiar or brings back memories. ";
  }
  text += "Use the chat history to follow up on what the user has already said. Ask no more than " +
          std::to_string(kMaxQuestionsPerRound) + " questions in this reply. This is question round " +
          std::to_string(round) + " of 2.";
  p.system_text = std::move(text);
  return p;
}

// ---------------------------------------------------------------------------

std::string to_json_line(const Utterance& u) {
  json j = {{"seq", u.seq},         {"speaker", to_string(u.speaker)}, {"text", u.text},
            {"t_us", u.timestamp_us}, {"photo_id", u.photo_id},        {"round", u.round}};
  return j.dump() + "\n";
}

Utterance utterance_from_json(std::string_view line) {
  try {
    const auto j = json::parse(line);
    Utterance u;
    u.seq = j.at("seq").get<std::int64_t>();
    const auto sp = j.at("speaker").get<std::string>();
    if (sp != "agent" && sp != "user") throw Error(ErrorCode::MalformedRecord, "unknown speaker '" + sp + "'");
    u.speaker = sp == "agent" ? Speaker::Agent : Speaker::User;
    u.text = j.at("text").get<std::string>();
    u.timestamp_us = j.at("t_us").get<std::int64_t>();
    u.photo_id = j.at("photo_id").get<std::string>();
    u.round = j.at("round").get<int>();
    return u;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("utterance: ") + e.what());
  }
}

namespace {

json artifacts_json(const ViewingArtifacts& a) {
  json rois = json::array();
  for (const auto& r : a.rois) {
    rois.push_back({{"rank", r.rank}, {"label", r.label ? json(*r.label) : json(nullptr)}, {"mass", r.mass}});
  }
  json j = {{"rois", rois}};
  j["focus"] = a.focus ? json(*a.focus) : json(nullptr);
  j["heatmap"] = a.heatmap_path ? json(*a.heatmap_path) : json(nullptr);
  return j;
}

ViewingArtifacts artifacts_from(const json& j) {
  ViewingArtifacts a;
  for (const auto& r : j.value("rois", json::array())) {
    RoiDigest d;
    d.rank = r.at("rank").get<int>();
    if (r.contains("label") && !r["label"].is_null()) d.label = r["label"].get<std::string>();
    d.mass = r.at("mass").get<double>();
    a.rois.push_back(std::move(d));
  }
  if (j.contains("focus") && !j["focus"].is_null()) a.focus = j["focus"].get<double>();
  if (j.contains("heatmap") && !j["heatmap"].is_null()) a.heatmap_path = j["heatmap"].get<std::string>();
  return a;
}

}  // namespace

std::string to_json_line(const SessionEvent& e) {
  json j = {{"kind", to_string(e.kind)}, {"t_us", e.t_us}};
  if (!e.text.empty() || e.kind == EventKind::UserReplied || e.kind == EventKind::AgentReplied) j["text"] = e.text;
  if (e.kind == EventKind::ViewingDone) j["artifacts"] = artifacts_json(e.artifacts);
  return j.dump() + "\n";
}

SessionEvent event_from_json(std::string_view line) {
  try {
    const auto j = json::parse(line);
    SessionEvent e;
    const auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::MalformedRecord, "unknown event kind");
    e.kind = *kind;
    e.t_us = j.value("t_us", std::int64_t{0});
    e.text = j.value("text", std::string());
    if (j.contains("artifacts")) e.artifacts = artifacts_from(j["artifacts"]);
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::MalformedRecord, std::string("event: ") + ex.what());
  }
}

std::string state_summary_json(const SessionState& s) {
  json order = json::array();
  for (const auto& p : s.photo_order) order.push_back({{"photo_id", p.photo_id}, {"theme", theme_id(p.theme)}});
  json j = {{"session_id", s.session_id},
            {"phase", to_string(s.phase)},
            {"photo_index", s.photo_index},
            {"round", s.round},
            {"awaiting", to_string(s.awaiting)},
            {"transcript_length", s.transcript.size()},
            {"seed", s.rng_seed},
            {"photo_order", order},
            {"skipped", s.skipped_photos},
            {"artifacts", artifacts_json(s.current_artifacts)}};
  if (s.phase != Phase::Completed) j["current_photo"] = s.current_photo().photo_id;
  return j.dump();
}

}  // namespace e2r
