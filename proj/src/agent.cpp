#include "e2r/agent.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"
#include "e2r/hash.hpp"
#include "e2r/image.hpp"

namespace e2r {

using nlohmann::json;

std::string_view to_string(Provider p) { return p == Provider::Remote ? "remote" : "mock"; }

AgentRequest make_request(PromptSpec prompt, std::span<const Utterance> transcript, std::string correlation_id,
                          int max_turns) {
  AgentRequest req;
  req.prompt = std::move(prompt);
  req.correlation_id = std::move(correlation_id);
  const auto keep = std::min<std::size_t>(transcript.size(), static_cast<std::size_t>(std::max(0, max_turns)));
  req.history.assign(transcript.end() - static_cast<std::ptrdiff_t>(keep), transcript.end());
  return req;
}

int count_questions(std::string_view text) {
  int n = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '?') ++n;
    // U+FF1F fullwidth question mark
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xEF &&
        static_cast<unsigned char>(text[i + 1]) == 0xBC && static_cast<unsigned char>(text[i + 2]) == 0x9F) {
      ++n;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::string replace_all(std::string s, std::string_view key, std::string_view value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
  return s;
}

constexpr std::string_view kNarrations[] = {
    "This photograph comes from our {theme} collection and takes us back to {era}. Take a moment to look at the "
    "people, the clothes and the everyday objects around them. Scenes like this were part of ordinary life for many "
    "families then, and each small detail tells us something about how people lived, worked and spent time together.",
    "Here is a picture from the {theme} theme, from {era}. Notice the setting and the small details: the furniture, "
    "the light, the way people stand and look at each other. Photos like this one were often taken on special days, "
    "and they keep a quiet record of the places and habits that shaped a generation.",
    "Let us look together at this {theme} photograph from {era}. It shows a familiar kind of moment from that time. "
    "Many households shared similar routines and treasured similar things, so this scene may feel close to home. "
    "Take your time and let your eyes wander over anything that catches your interest.",
};

constexpr std::string_view kTargetedFirst[] = {
    "I noticed your eyes kept returning to the {label}. What does the {label} remind you of from your own life?",
    "The {label} seems to have caught your attention. Did your family have something like it when you were younger? "
    "Who used it most?",
    "You spent a while looking at the {label}. What memories come to mind when you see it?",
};

constexpr std::string_view kTargetedFollowUp[] = {
    "Thank you for sharing that. Thinking about the {label} again, what else do you remember about that time?",
    "That sounds meaningful. Is there a particular moment involving the {label} that stays with you?",
};

constexpr std::string_view kGeneralFirst[] = {
    "Looking at this {theme} photo, does anything in it feel familiar to you? Which part brings back memories?",
    "This scene has many details. Does any of them remind you of your own experiences from that time?",
};

constexpr std::string_view kGeneralFollowUp[] = {
    "Thank you for telling me. What else from that period would you like to talk about?",
    "That is lovely to hear. Who else do you remember from those days?",
};

template <std::size_t N>
std::string_view pick(const std::string_view (&options)[N], std::uint64_t h) {
  return options[h % N];
}

}  // namespace

AgentReply MockAgent::complete(const AgentRequest& req) {
  const auto& p = req.prompt;
  std::uint64_t h = fnv1a(std::to_string(seed_));
  h = fnv1a(p.system_text, h);
  for (const auto& u : req.history) h = fnv1a(u.text, fnv1a(to_string(u.speaker), h));
  h ^= h >> 29;

  std::string text;
  const std::string theme(theme_display(p.theme));
  if (p.kind == PromptKind::Narration) {
    // The era is embedded in the system text; the mock only needs the theme.
    const auto era_pos = p.system_text.find("(era: ");
    std::string era = "an earlier time";
    if (era_pos != std::string::npos) {
      const auto end = p.system_text.find(')', era_pos);
      const auto value = p.system_text.substr(era_pos + 6, end - era_pos - 6);
      if (value != "unknown") era = "the " + value;
    }
    text = replace_all(replace_all(std::string(pick(kNarrations, h)), "{theme}", theme), "{era}", era);
  } else {
    std::string_view tmpl;
    if (p.target_label) {
      tmpl = p.round <= 1 ? pick(kTargetedFirst, h) : pick(kTargetedFollowUp, h);
    } else {
      tmpl = p.round <= 1 ? pick(kGeneralFirst, h) : pick(kGeneralFollowUp, h);
    }
    text = replace_all(replace_all(std::string(tmpl), "{label}", p.target_label.value_or("")), "{theme}", theme);
  }
  return {std::move(text), 0, Provider::Mock};
}

// ---------------------------------------------------------------------------
// Remote

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  c.endpoint = get("E2R_LLM_ENDPOINT");
  c.model = get("E2R_LLM_MODEL");
  c.api_key = get("E2R_LLM_KEY");
  if (c.endpoint.empty()) throw Error(ErrorCode::ConfigInvalid, "E2R_LLM_ENDPOINT is not set");
  if (c.model.empty()) c.model = "gpt-4o";
  return c;
}

RemoteAgent::RemoteAgent(RemoteConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw Error(ErrorCode::ConfigInvalid, "remote endpoint is empty");
}

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "endpoint must be an absolute URL");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string data_url(const Attachment& a) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(a.path);
  } catch (const Error&) {
    throw Error(ErrorCode::MissingAttachment, "attachment not readable: " + a.path.string());
  }
  std::string media = a.media_type;
  if (media != "image/png") {
    bytes = encode_png(decode_pgm(bytes));
    media = "image/png";
  }
  return "data:" + media + ";base64," + base64_encode(bytes);
}

}  // namespace

json RemoteAgent::build_body(const AgentRequest& req) const {
  const auto& p = req.prompt;
  if (!p.photo.present) throw Error(ErrorCode::MissingAttachment, "photo attachment absent for '" + p.photo_id + "'");
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", p.system_text}});
  for (const auto& u : req.history) {
    messages.push_back({{"role", u.speaker == Speaker::Agent ? "assistant" : "user"}, {"content", u.text}});
  }
  json content = json::array();
  if (p.kind == PromptKind::Narration) {
    content.push_back({{"type", "text"}, {"text", "Please introduce this photo."}});
  } else {
    content.push_back({{"type", "text"},
                       {"text", "Attention summary: " + p.roi_summary + " The heatmap overlay is attached when available."}});
  }
  content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(p.photo)}}}});
  if (p.heatmap_overlay && p.heatmap_overlay->present) {
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(*p.heatmap_overlay)}}}});
  }
  messages.push_back({{"role", "user"}, {"content", content}});
  return {{"model", config_.model},
          {"temperature", p.creativity},
          {"max_tokens", p.response_length},
          {"messages", messages}};
}

AgentReply RemoteAgent::complete(const AgentRequest& req) {
  const auto body = build_body(req).dump();
  const auto url = split_url(config_.endpoint);
  const auto started = std::chrono::steady_clock::now();

  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  int last_status = 0;
  std::string last_body;
  auto backoff = config_.backoff;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      last_status = 0;
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        const auto j = json::parse(res->body);
        auto text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (text.empty()) throw Error(ErrorCode::ProviderRejected, "empty completion");
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        return {std::move(text), ms.count(), Provider::Remote};
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ProviderRejected, std::string("unparseable response: ") + e.what());
      }
    }
    last_status = res->status;
    last_body = res->body.substr(0, 200);
    // Only throttling and server errors are retried.
    if (res->status != 429 && res->status < 500) break;
  }
  if (last_status != 0) {
    throw Error(ErrorCode::ProviderRejected, "status " + std::to_string(last_status) + ": " + last_body);
  }
  throw Error(ErrorCode::ProviderTimeout,
              "no response after " + std::to_string(config_.retries + 1) + " attempts (" + last_error + ")");
}

// ---------------------------------------------------------------------------
// Audit

json redact_and_log(const AgentRequest& req, const AgentReply& reply, const RemoteConfig* remote) {
  const auto& p = req.prompt;
  auto attachment = [](const Attachment& a, std::string_view role) {
    json j = {{"role", role}, {"present", a.present}};
    if (a.present) {
      try {
        const auto bytes = read_file_bytes(a.path);
        j["sha256"] = sha256_hex(bytes);
        j["bytes"] = bytes.size();
      } catch (const Error&) {
        j["present"] = false;
      }
    }
    return j;
  };
  json atts = json::array();
  atts.push_back(attachment(p.photo, "photo"));
  if (p.heatmap_overlay) atts.push_back(attachment(*p.heatmap_overlay, "heatmap"));

  json rec = {{"correlation_id", req.correlation_id},
              {"provider", to_string(reply.provider)},
              {"kind", p.kind == PromptKind::Narration ? "narration" : "question"},
              {"photo_id", p.photo_id},
              {"round", p.round},
              {"temperature", p.creativity},
              {"max_tokens", p.response_length},
              {"history_turns", req.history.size()},
              {"system_text_sha256", sha256_hex(p.system_text)},
              {"attachments", atts},
              {"reply_sha256", sha256_hex(reply.text)},
              {"reply_chars", reply.text.size()},
              {"latency_ms", reply.latency_ms}};
  if (reply.provider == Provider::Remote && remote) {
    rec["endpoint_origin"] = split_url(remote->endpoint).origin;
    rec["model"] = remote->model;
    // Attachments travel inline in the request body; nothing is uploaded
    // that would need a follow-up deletion call.
    rec["remote_uploads"] = 0;
  }
  return rec;
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {}

void AuditLog::append(const json& record) {
  std::lock_guard lock(mu_);
  append_durable(path_, record.dump() + "\n");
}

AgentReply AuditedAgent::complete(const AgentRequest& req) {
  auto reply = inner_.complete(req);
  log_.append(redact_and_log(req, reply, remote_));
  return reply;
}

}  // namespace e2r
