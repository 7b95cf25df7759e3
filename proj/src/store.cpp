#include "e2r/store.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "e2r/driver.hpp"
#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"

namespace e2r {

namespace {

using nlohmann::json;

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
           c == '.';
  }) && id != "." && id != "..";
}

}  // namespace

std::string to_json(const SessionManifest& m) {
  json order = json::array();
  for (const auto& p : m.photo_order) order.push_back({{"photo_id", p.photo_id}, {"theme", theme_id(p.theme)}});
  json j = {{"session_id", m.session_id},
            {"seed", m.seed},
            {"provider", to_string(m.provider)},
            {"prompt_version", m.prompt_version},
            {"gaze_space", m.gaze_space == GazeSpace::Screen ? "screen" : "photo"},
            {"photo_order", order},
            {"photos", json::parse(to_json(m.photos))},
            {"config", m.config_json.empty() ? json::object() : json::parse(m.config_json)},
            {"created_unix_s", m.created_unix_s}};
  return j.dump(2) + "\n";
}

SessionManifest manifest_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    SessionManifest m;
    m.session_id = j.at("session_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto provider = j.at("provider").get<std::string>();
    if (provider == to_string(Provider::Mock)) {
      m.provider = Provider::Mock;
    } else if (provider == to_string(Provider::Remote)) {
      m.provider = Provider::Remote;
    } else {
      throw Error(ErrorCode::MalformedRecord, "manifest: unknown provider '" + provider + "'");
    }
    m.prompt_version = j.at("prompt_version").get<std::string>();
    m.gaze_space = j.value("gaze_space", std::string("screen")) == "photo" ? GazeSpace::Photo : GazeSpace::Screen;
    for (const auto& p : j.at("photo_order")) {
      const auto theme = parse_theme(p.at("theme").get<std::string>());
      if (!theme) throw Error(ErrorCode::MalformedRecord, "manifest: unknown theme");
      m.photo_order.push_back({p.at("photo_id").get<std::string>(), *theme});
    }
    m.photos = parse_photo_library(j.at("photos").dump(), {});
    m.config_json = j.at("config").dump();
    m.created_unix_s = j.value("created_unix_s", std::int64_t{0});
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("manifest: ") + e.what());
  }
}

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec || !std::filesystem::is_directory(root_)) {
    throw Error(ErrorCode::ConfigInvalid, "store root not writable: " + root_.string());
  }
  const auto probe = root_ / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw Error(ErrorCode::ConfigInvalid, "store root not writable: " + root_.string());
  }
  std::filesystem::remove(probe, ec);
}

std::filesystem::path SessionStore::session_dir(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::InvalidArgument, "invalid session id '" + id + "'");
  return root_ / id;
}

std::filesystem::path SessionStore::gaze_path(const std::string& id, const std::string& photo_id) const {
  if (!valid_id(photo_id)) throw Error(ErrorCode::InvalidArgument, "invalid photo id '" + photo_id + "'");
  return session_dir(id) / "gaze" / (photo_id + ".jsonl");
}

bool SessionStore::exists(const std::string& id) const {
  if (!valid_id(id)) return false;
  std::error_code ec;
  return std::filesystem::is_regular_file(root_ / id / "manifest.json", ec);
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(root_)) {
    const auto id = entry.path().filename().string();
    if (entry.is_directory() && exists(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void SessionStore::create(const SessionManifest& manifest) {
  const auto dir = session_dir(manifest.session_id);
  if (std::filesystem::exists(dir)) {
    throw Error(ErrorCode::InvalidArgument, "session '" + manifest.session_id + "' already exists");
  }
  std::filesystem::create_directories(dir / "gaze");
  std::filesystem::create_directories(dir / "heatmaps");
  for (const char* log : {"events.jsonl", "transcript.jsonl", "audit.jsonl"}) append_durable(dir / log, {});
  write_manifest(manifest);
}

void SessionStore::write_manifest(const SessionManifest& manifest) {
  write_atomic(session_dir(manifest.session_id) / "manifest.json", to_json(manifest));
}

SessionManifest SessionStore::manifest(const std::string& id) const {
  if (!exists(id)) throw Error(ErrorCode::NotFound, "session '" + id + "' not found");
  return manifest_from_json(read_text(session_dir(id) / "manifest.json"));
}

void SessionStore::append_events(const std::string& id, std::span<const SessionEvent> events) {
  std::string data;
  for (const auto& e : events) data += to_json_line(e);
  append_durable(session_dir(id) / "events.jsonl", data);
}

void SessionStore::append_utterances(const std::string& id, std::span<const Utterance> utterances) {
  if (utterances.empty()) return;
  std::string data;
  for (const auto& u : utterances) data += to_json_line(u);
  append_durable(session_dir(id) / "transcript.jsonl", data);
}

void SessionStore::append_gaze(const std::string& id, const std::string& photo_id,
                               std::span<const ScreenGazePoint> points) {
  std::string data;
  for (const auto& p : points) data += to_jsonl_record(p);
  append_durable(gaze_path(id, photo_id), data);
}

std::vector<SessionEvent> SessionStore::events(const std::string& id) const {
  std::vector<SessionEvent> out;
  for (const auto& line : read_lines(session_dir(id) / "events.jsonl")) out.push_back(event_from_json(line));
  return out;
}

std::vector<Utterance> SessionStore::transcript(const std::string& id) const {
  std::vector<Utterance> out;
  for (const auto& line : read_lines(session_dir(id) / "transcript.jsonl")) out.push_back(utterance_from_json(line));
  return out;
}

SessionState restore_state(const SessionManifest& manifest, std::span<const SessionEvent> events) {
  auto state = start_session(manifest.photos.photos, manifest.seed, manifest.session_id);
  if (state.photo_order != manifest.photo_order) {
    throw Error(ErrorCode::MalformedRecord, "manifest photo order does not match its photo snapshot");
  }
  for (const auto& e : events) state = step(state, e);
  return state;
}

std::string ReplayVerdict::to_string() const {
  return identical ? "identical" : "diverged(" + std::to_string(diverged_seq.value_or(0)) + ")";
}

ReplayVerdict replay_session(const std::filesystem::path& session_dir) {
  const auto manifest = manifest_from_json(read_text(session_dir / "manifest.json"));
  if (manifest.provider != Provider::Mock) {
    throw Error(ErrorCode::NotReplayable, "session '" + manifest.session_id + "' used a remote provider");
  }
  const auto config = parse_config(manifest.config_json);
  DriverConfig driver_config{config.prompts, config.history_turns};

  std::vector<SessionEvent> external;
  for (const auto& line : read_lines(session_dir / "events.jsonl")) {
    auto e = event_from_json(line);
    if (e.kind != EventKind::AgentReplied) external.push_back(std::move(e));
  }

  MockAgent agent(manifest.seed);
  SessionDriver driver(manifest.photos, agent, driver_config);
  auto state = start_session(manifest.photos.photos, manifest.seed, manifest.session_id);
  for (const auto& e : external) driver.apply(state, e);

  ReplayVerdict verdict;
  verdict.transcript = state.transcript;
  const auto recorded = read_lines(session_dir / "transcript.jsonl");
  const auto n = std::max(recorded.size(), state.transcript.size());
  for (std::size_t i = 0; i < n; ++i) {
    const bool same = i < recorded.size() && i < state.transcript.size() &&
                      recorded[i] + "\n" == to_json_line(state.transcript[i]);
    if (!same) {
      verdict.identical = false;
      verdict.diverged_seq = static_cast<std::int64_t>(i) + 1;
      break;
    }
  }
  return verdict;
}

}  // namespace e2r
