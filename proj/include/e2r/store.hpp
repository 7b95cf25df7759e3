#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2r/agent.hpp"
#include "e2r/config.hpp"
#include "e2r/photo_library.hpp"
#include "e2r/session.hpp"

namespace e2r {

enum class GazeSpace { Screen, Photo };

struct SessionManifest {
  std::string session_id;
  std::uint64_t seed = 0;
  Provider provider = Provider::Mock;
  std::string prompt_version{kPromptTemplateVersion};
  GazeSpace gaze_space = GazeSpace::Screen;
  std::vector<PhotoSlot> photo_order;
  PhotoLibrary photos;      // snapshot of the records used, so replays need no live library
  std::string config_json;  // snapshot of the effective config
  std::int64_t created_unix_s = 0;
};

std::string to_json(const SessionManifest& m);
SessionManifest manifest_from_json(std::string_view text);

// Layout of one session directory:
//   manifest.json        rewritten atomically
//   events.jsonl         every applied event, agent replies included
//   transcript.jsonl     utterances in seq order
//   audit.jsonl          agent call records (attachments hashed)
//   gaze/<photo>.jsonl   raw gaze batches as received
//   heatmaps/            per-photo artifacts from analysis
// Logs are append-only and fsynced per append.
class SessionStore {
 public:
  // Creates the root if needed. Throws ConfigInvalid when it is not writable.
  explicit SessionStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path session_dir(const std::string& id) const;
  std::filesystem::path heatmap_dir(const std::string& id) const { return session_dir(id) / "heatmaps"; }
  std::filesystem::path audit_path(const std::string& id) const { return session_dir(id) / "audit.jsonl"; }
  std::filesystem::path gaze_path(const std::string& id, const std::string& photo_id) const;

  bool exists(const std::string& id) const;
  std::vector<std::string> list() const;

  // Throws InvalidArgument if the session directory already exists.
  void create(const SessionManifest& manifest);
  void write_manifest(const SessionManifest& manifest);
  SessionManifest manifest(const std::string& id) const;

  void append_events(const std::string& id, std::span<const SessionEvent> events);
  void append_utterances(const std::string& id, std::span<const Utterance> utterances);
  void append_gaze(const std::string& id, const std::string& photo_id, std::span<const ScreenGazePoint> points);

  std::vector<SessionEvent> events(const std::string& id) const;
  std::vector<Utterance> transcript(const std::string& id) const;

 private:
  std::filesystem::path root_;
};

// Folds the state machine over the logged events.
SessionState restore_state(const SessionManifest& manifest, std::span<const SessionEvent> events);

struct ReplayVerdict {
  bool identical = true;
  std::optional<std::int64_t> diverged_seq;  // first differing transcript seq
  std::vector<Utterance> transcript;         // reconstructed

  std::string to_string() const;  // "identical" or "diverged(<seq>)"
};

// Re-runs the session from the manifest seed and the logged external events
// with the mock agent, then compares against transcript.jsonl line by line.
// Throws NotReplayable for sessions recorded with a remote provider.
ReplayVerdict replay_session(const std::filesystem::path& session_dir);

}  // namespace e2r
