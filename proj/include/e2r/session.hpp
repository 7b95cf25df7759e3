#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2r/attention_map.hpp"
#include "e2r/photo_library.hpp"

namespace e2r {

enum class Phase { Calibration, Viewing, Narration, QuestionRound, Advancing, Completed };
enum class Speaker { Agent, User };
enum class EventKind { CalibrationDone, ViewingDone, AgentReplied, UserReplied, SkipPhoto };

std::string_view to_string(Phase p);
std::string_view to_string(Speaker s);
std::string_view to_string(EventKind k);
std::optional<Phase> parse_phase(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);

struct Utterance {
  std::int64_t seq = 0;
  Speaker speaker = Speaker::Agent;
  std::string text;
  std::int64_t timestamp_us = 0;
  std::string photo_id;
  int round = 0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

// Compact ROI view carried by ViewingDone and consumed by question prompts.
struct RoiDigest {
  int rank = 0;
  std::optional<std::string> label;
  double mass = 0.0;

  friend bool operator==(const RoiDigest&, const RoiDigest&) = default;
};

struct ViewingArtifacts {
  std::vector<RoiDigest> rois;
  std::optional<double> focus;
  std::optional<std::string> heatmap_path;

  friend bool operator==(const ViewingArtifacts&, const ViewingArtifacts&) = default;
};

std::vector<RoiDigest> digest(std::span<const RegionOfInterest> rois);

struct SessionEvent {
  EventKind kind = EventKind::CalibrationDone;
  std::string text;
  std::int64_t t_us = 0;
  ViewingArtifacts artifacts;  // ViewingDone only

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

struct PhotoSlot {
  std::string photo_id;
  Theme theme = Theme::Childhood;

  friend bool operator==(const PhotoSlot&, const PhotoSlot&) = default;
};

struct SessionState {
  std::string session_id;
  Phase phase = Phase::Calibration;
  int photo_index = 0;
  int round = 0;  // 0 before/while narrating, then 1..2
  Speaker awaiting = Speaker::Agent;  // whose turn inside Narration/QuestionRound
  std::vector<Utterance> transcript;
  std::uint64_t rng_seed = 0;
  std::vector<PhotoSlot> photo_order;
  ViewingArtifacts current_artifacts;
  std::vector<std::string> skipped_photos;

  const PhotoSlot& current_photo() const { return photo_order.at(photo_index); }
  std::int64_t next_seq() const { return static_cast<std::int64_t>(transcript.size()) + 1; }

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

// Stable sort into the canonical theme order. Throws EmptyLibrary.
SessionState start_session(std::span<const PhotoRecord> photos, std::uint64_t seed, std::string session_id = {});

// Pure transition function. Throws IllegalTransition naming phase and event.
SessionState step(const SessionState& state, const SessionEvent& event);

// Whether the next move belongs to the agent (Narration, or a question round
// waiting for the agent's question).
bool agent_turn(const SessionState& state);

// ---------------------------------------------------------------------------
// Prompts

enum class PromptKind { Narration, Question };

inline constexpr double kNarrationCreativity = 1.0;
inline constexpr int kNarrationLength = 600;
inline constexpr double kQuestionCreativity = 0.5;
inline constexpr int kQuestionLength = 200;
inline constexpr int kMaxQuestionsPerRound = 2;
inline constexpr std::string_view kPromptTemplateVersion = "e2r-prompts/1";

struct Attachment {
  std::filesystem::path path;
  std::string media_type;
  bool present = false;
};

struct PromptSpec {
  PromptKind kind = PromptKind::Narration;
  std::string system_text;
  double creativity = 0.0;   // sent as sampling temperature
  int response_length = 0;   // sent as max tokens
  std::string photo_id;
  Theme theme = Theme::Childhood;
  int round = 0;
  Attachment photo;
  std::optional<Attachment> heatmap_overlay;
  std::string roi_summary;
  double focus = 0.0;
  std::optional<std::string> target_label;  // set only for targeted questions
};

struct PromptConfig {
  double focus_threshold = 0.5;
};

PromptSpec build_narration_prompt(const PhotoRecord& photo);
PromptSpec build_question_prompt(const PhotoRecord& photo, std::span<const RoiDigest> rois, double focus, int round,
                                 const PromptConfig& config = {});

// "1. Television (0.80); 2. Decoration (0.20)" or a fixed no-data sentence.
std::string roi_summary_text(std::span<const RoiDigest> rois);

// ---------------------------------------------------------------------------
// Serialization (line-delimited records)

std::string to_json_line(const Utterance& u);
Utterance utterance_from_json(std::string_view line);
std::string to_json_line(const SessionEvent& e);
SessionEvent event_from_json(std::string_view line);
std::string state_summary_json(const SessionState& s);

}  // namespace e2r
