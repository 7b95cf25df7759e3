#include "e2r/service.hpp"

#include <sys/socket.h>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "e2r/driver.hpp"
#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"
#include "e2r/hash.hpp"
#include "e2r/image.hpp"
#include "e2r/pipeline.hpp"
#include "e2r/store.hpp"

namespace e2r {

namespace {

using nlohmann::json;

// Fixed-size pool with a bounded queue; submit() fails fast when full.
class WorkerPool {
 public:
  WorkerPool(int workers, std::size_t max_queue) : max_queue_(max_queue) {
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { run(); });
  }
  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  template <class F>
  auto submit(F fn) -> std::future<decltype(fn())> {
    auto task = std::make_shared<std::packaged_task<decltype(fn())()>>(std::move(fn));
    auto fut = task->get_future();
    {
      std::lock_guard lock(mu_);
      if (queue_.size() >= max_queue_) throw Error(ErrorCode::Io, "analysis queue is full");
      queue_.emplace_back([task] { (*task)(); });
    }
    cv_.notify_one();
    return fut;
  }

 private:
  void run() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      job();
    }
  }

  std::size_t max_queue_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::thread> threads_;
  bool stopping_ = false;
};

struct LiveSession {
  std::mutex mu;
  SessionManifest manifest;
  SessionState state;
  std::unique_ptr<AgentGateway> backend;
  std::unique_ptr<AuditLog> audit;
  std::unique_ptr<AuditedAgent> agent;
  std::optional<RemoteConfig> remote;
};

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::IllegalTransition:
      return 409;
    case ErrorCode::ProviderTimeout:
      return 504;
    case ErrorCode::ProviderRejected:
      return 502;
    case ErrorCode::Io:
    case ErrorCode::MissingAttachment:
      return 500;
    default:
      return 400;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, {{"error", std::string(to_string(code))}, {"message", message}}, http_status(code));
}

std::string media_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".pgm") return "image/x-portable-graymap";
  return "application/octet-stream";
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("request body: ") + e.what());
  }
}

}  // namespace

struct Service::Impl {
  Config config;
  PhotoLibrary library;
  SessionStore store;
  WorkerPool pool;
  httplib::Server server;
  std::thread listener;
  int bound_port = 0;
  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;

  explicit Impl(Config c)
      : config(std::move(c)),
        library(load_library(config)),
        store(config.store_root),
        pool(config.workers, static_cast<std::size_t>(config.workers) * 4) {
    if (!config.static_dir.empty() && !std::filesystem::is_directory(config.static_dir)) {
      throw Error(ErrorCode::ConfigInvalid, "static directory not found: " + config.static_dir.string());
    }
    routes();
  }

  static PhotoLibrary load_library(const Config& c) {
    if (c.library_manifest.empty()) throw Error(ErrorCode::ConfigInvalid, "no photo library configured");
    auto lib = load_photo_library(c.library_manifest);
    if (!std::filesystem::is_directory(lib.root)) {
      throw Error(ErrorCode::ConfigInvalid, "photo directory not found: " + lib.root.string());
    }
    for (const auto& p : lib.photos) {
      if (!std::filesystem::is_regular_file(p.image_path)) {
        throw Error(ErrorCode::ConfigInvalid, "photo file not found: " + p.image_path.string());
      }
    }
    if (lib.photos.empty()) throw Error(ErrorCode::ConfigInvalid, "photo library is empty");
    return lib;
  }

  std::unique_ptr<AgentGateway> make_backend(const SessionManifest& m, std::optional<RemoteConfig>& remote) const {
    if (m.provider == Provider::Mock) return std::make_unique<MockAgent>(m.seed);
    remote = remote_config(config);
    return std::make_unique<RemoteAgent>(*remote);
  }

  std::shared_ptr<LiveSession> attach(SessionManifest manifest, SessionState state) {
    auto live = std::make_shared<LiveSession>();
    live->backend = make_backend(manifest, live->remote);
    live->audit = std::make_unique<AuditLog>(store.audit_path(manifest.session_id));
    live->agent = std::make_unique<AuditedAgent>(*live->backend, *live->audit, live->remote ? &*live->remote : nullptr);
    live->manifest = std::move(manifest);
    live->state = std::move(state);
    return live;
  }

  std::shared_ptr<LiveSession> session(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    if (auto it = sessions.find(id); it != sessions.end()) return it->second;
    auto manifest = store.manifest(id);
    const auto events = store.events(id);
    auto state = restore_state(manifest, events);
    auto live = attach(std::move(manifest), std::move(state));
    sessions.emplace(id, live);
    return live;
  }

  DriverConfig driver_config(const SessionManifest& m) const {
    const auto c = parse_config(m.config_json);
    return {c.prompts, c.history_turns};
  }

  json create_session(const json& body) {
    const auto seed = body.value("seed", std::uint64_t{0});
    SessionManifest m;
    m.seed = seed;
    m.provider = config.provider;
    m.config_json = to_json(config);
    m.created_unix_s = now_us() / 1'000'000;
    const auto space = body.value("gaze_space", std::string("screen"));
    if (space != "screen" && space != "photo") throw Error(ErrorCode::InvalidArgument, "gaze_space must be screen|photo");
    m.gaze_space = space == "photo" ? GazeSpace::Photo : GazeSpace::Screen;
    m.photos.root = library.root;
    if (body.contains("photo_ids")) {
      for (const auto& id : body["photo_ids"]) {
        const auto* p = library.find(id.get<std::string>());
        if (!p) throw Error(ErrorCode::NotFound, "photo '" + id.get<std::string>() + "' not in library");
        m.photos.photos.push_back(*p);
      }
    } else {
      m.photos.photos = library.photos;
    }
    for (auto& p : m.photos.photos) p.image_path = std::filesystem::absolute(p.image_path);

    std::lock_guard lock(sessions_mu);
    std::uint64_t salt = static_cast<std::uint64_t>(now_us());
    do {
      char buf[32];
      std::snprintf(buf, sizeof buf, "s%012llx",
                    static_cast<unsigned long long>(fnv1a(std::to_string(seed), salt++) & 0xffffffffffffULL));
      m.session_id = buf;
    } while (store.exists(m.session_id) || sessions.contains(m.session_id));

    auto state = start_session(m.photos.photos, m.seed, m.session_id);
    m.photo_order = state.photo_order;
    auto live = attach(m, std::move(state));
    store.create(m);
    sessions.emplace(m.session_id, live);
    return {{"session_id", m.session_id}};
  }

  std::size_t post_gaze(const std::string& id, const json& body) {
    const json& records = body.is_array() ? body : body.value("records", json::array());
    if (!records.is_array()) throw Error(ErrorCode::InvalidArgument, "'records' must be an array");
    std::string lines;
    for (const auto& r : records) lines += r.dump() + "\n";

    auto live = session(id);
    std::lock_guard lock(live->mu);
    if (live->state.phase != Phase::Viewing) {
      throw Error(ErrorCode::IllegalTransition,
                  "gaze accepted only while Viewing (phase " + std::string(to_string(live->state.phase)) + ")");
    }
    auto points = parse_gaze_records(lines, config.geometry);
    const auto& photo_id = live->state.current_photo().photo_id;
    if (live->manifest.gaze_space == GazeSpace::Photo) {
      const auto* photo = live->manifest.photos.find(photo_id);
      const auto to_screen = display_homography(config.geometry.screen_size(), photo->size).inverse();
      for (auto& p : points) {
        if (auto s = to_screen.apply(p.screen_xy)) p.screen_xy = *s;
        p.valid = config.geometry.screen_size().contains(p.screen_xy);
      }
    }
    store.append_gaze(id, photo_id, points);
    return points.size();
  }

  // Runs the visual pipeline for the photo being viewed. Analysis failures
  // (no or unusable gaze) fall back to empty artifacts, i.e. general questions.
  std::pair<ViewingArtifacts, std::string> analyse_current(const LiveSession& live) {
    const auto& photo_id = live.state.current_photo().photo_id;
    const auto* photo = live.manifest.photos.find(photo_id);
    const auto gaze_path = store.gaze_path(live.manifest.session_id, photo_id);
    const auto out_dir = store.heatmap_dir(live.manifest.session_id);
    auto job = [this, photo, gaze_path, out_dir, participant = live.manifest.session_id] {
      const auto text = read_text(gaze_path);
      const auto result = analyze_gaze(text, *photo, config);
      const auto paths = write_artifacts(result, *photo, participant, out_dir);
      ViewingArtifacts art;
      art.rois = digest(result.rois);
      art.focus = result.focus;
      art.heatmap_path = (paths.overlay_png ? *paths.overlay_png : paths.heatmap_png).string();
      return art;
    };
    std::error_code ec;
    if (!std::filesystem::exists(gaze_path, ec)) return {{}, "no gaze recorded"};
    try {
      return {pool.submit(job).get(), {}};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Io) throw;
      return {{}, e.what()};
    }
  }

  json post_event(const std::string& id, const json& body) {
    const auto kind_text = body.value("kind", std::string());
    const auto kind = parse_event_kind(kind_text);
    if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown event kind '" + kind_text + "'");
    if (*kind == EventKind::AgentReplied) throw Error(ErrorCode::InvalidArgument, "AgentReplied is server-generated");

    auto live = session(id);
    std::lock_guard lock(live->mu);
    SessionEvent event;
    event.kind = *kind;
    event.text = body.value("text", std::string());
    event.t_us = now_us();
    std::string analysis_note;
    if (*kind == EventKind::ViewingDone && live->state.phase == Phase::Viewing) {
      std::tie(event.artifacts, analysis_note) = analyse_current(*live);
    }

    SessionDriver driver(live->manifest.photos, *live->agent, driver_config(live->manifest));
    auto state = live->state;
    const auto applied = driver.apply(state, event);
    const auto first_new = live->state.transcript.size();
    store.append_events(id, applied);
    store.append_utterances(id, std::span(state.transcript).subspan(first_new));
    live->state = std::move(state);

    auto out = json::parse(state_summary_json(live->state));
    if (!analysis_note.empty()) out["analysis_note"] = analysis_note;
    return out;
  }

  json transcript_after(const std::string& id, std::int64_t after) {
    auto live = session(id);
    std::lock_guard lock(live->mu);
    json list = json::array();
    for (const auto& u : live->state.transcript) {
      if (u.seq > after) list.push_back(json::parse(to_json_line(u)));
    }
    return {{"utterances", list}};
  }

  void routes() {
    auto guarded = [](auto fn) {
      return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
          fn(req, res);
        } catch (const Error& e) {
          send_error(res, e.code(), e.what());
        } catch (const json::exception& e) {
          send_error(res, ErrorCode::InvalidArgument, e.what());
        } catch (const std::exception& e) {
          send_error(res, ErrorCode::Io, e.what());
        }
      };
    };

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}});
    });
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, create_session(parse_body(req)), 201);
                }));
    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto live = session(req.matches[1]);
                 std::lock_guard lock(live->mu);
                 send_json(res, json::parse(state_summary_json(live->state)));
               }));
    server.Post(R"(/sessions/([^/]+)/gaze)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, {{"accepted", post_gaze(req.matches[1], parse_body(req))}});
                }));
    server.Post(R"(/sessions/([^/]+)/event)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, post_event(req.matches[1], parse_body(req)));
                }));
    server.Get(R"(/sessions/([^/]+)/transcript)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::int64_t after = 0;
                 if (req.has_param("after")) {
                   try {
                     after = std::stoll(req.get_param_value("after"));
                   } catch (const std::exception&) {
                     throw Error(ErrorCode::InvalidArgument, "'after' must be an integer");
                   }
                 }
                 send_json(res, transcript_after(req.matches[1], after));
               }));
    server.Get(R"(/sessions/([^/]+)/heatmap\.png)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 if (!store.exists(id)) throw Error(ErrorCode::NotFound, "session '" + id + "' not found");
                 const auto photo = req.get_param_value("photo");
                 if (photo.empty()) throw Error(ErrorCode::InvalidArgument, "missing 'photo' parameter");
                 const auto dir = store.heatmap_dir(id);
                 auto path = dir / (photo + ".overlay.png");
                 if (req.get_param_value("overlay") == "0" || !std::filesystem::exists(path)) path = dir / (photo + ".png");
                 if (photo.find('/') != std::string::npos || !std::filesystem::exists(path)) {
                   throw Error(ErrorCode::NotFound, "no heatmap for photo '" + photo + "'");
                 }
                 const auto bytes = read_file_bytes(path);
                 res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
               }));
    server.Get("/photos", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(to_json(library), "application/json");
    });
    server.Get(R"(/photos/([^/]+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const auto* p = library.find(id);
                 if (!p) throw Error(ErrorCode::NotFound, "photo '" + id + "' not in library");
                 const auto bytes = read_file_bytes(p->image_path);
                 res.set_content(std::string(bytes.begin(), bytes.end()), media_type_for(p->image_path));
               }));
    if (!config.static_dir.empty()) server.set_mount_point("/", config.static_dir.string());

    // SO_REUSEPORT (httplib's default) would let a second server share the port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
  }
};

Service::Service(Config config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

void Service::start() {
  auto& s = *impl_;
  if (s.config.port == 0) {
    s.bound_port = s.server.bind_to_any_port(s.config.host);
    if (s.bound_port <= 0) throw Error(ErrorCode::PortUnavailable, "cannot bind " + s.config.host);
  } else {
    if (!s.server.bind_to_port(s.config.host, s.config.port)) {
      throw Error(ErrorCode::PortUnavailable, "port " + std::to_string(s.config.port) + " is unavailable");
    }
    s.bound_port = s.config.port;
  }
  s.listener = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
}

int Service::port() const { return impl_->bound_port; }

void Service::stop() {
  auto& s = *impl_;
  s.server.stop();
  if (s.listener.joinable()) s.listener.join();
  {
    std::lock_guard lock(s.stop_mu);
    s.stopped = true;
  }
  s.stop_cv.notify_all();
}

void Service::wait() {
  auto& s = *impl_;
  std::unique_lock lock(s.stop_mu);
  s.stop_cv.wait(lock, [&s] { return s.stopped; });
}

}  // namespace e2r
