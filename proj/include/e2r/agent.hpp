#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "e2r/session.hpp"

namespace e2r {

enum class Provider { Remote, Mock };
std::string_view to_string(Provider p);

inline constexpr int kDefaultHistoryTurns = 10;

struct AgentRequest {
  PromptSpec prompt;
  std::vector<Utterance> history;
  std::string correlation_id;
};

// Keeps the last `max_turns` utterances of the transcript.
AgentRequest make_request(PromptSpec prompt, std::span<const Utterance> transcript, std::string correlation_id,
                          int max_turns = kDefaultHistoryTurns);

struct AgentReply {
  std::string text;
  std::int64_t latency_ms = 0;
  Provider provider = Provider::Mock;
};

class AgentGateway {
 public:
  virtual ~AgentGateway() = default;
  virtual AgentReply complete(const AgentRequest& req) = 0;
  virtual Provider provider() const = 0;
};

// Deterministic offline agent: a pure function of (prompt, history, seed).
class MockAgent final : public AgentGateway {
 public:
  explicit MockAgent(std::uint64_t seed) : seed_(seed) {}
  AgentReply complete(const AgentRequest& req) override;
  Provider provider() const override { return Provider::Mock; }

 private:
  std::uint64_t seed_;
};

struct RemoteConfig {
  std::string endpoint;  // full URL of the chat-completions route
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{30'000};
  int retries = 2;
  std::chrono::milliseconds backoff{500};  // doubled after each failed attempt

  // E2R_LLM_ENDPOINT, E2R_LLM_MODEL, E2R_LLM_KEY. Throws ConfigInvalid when
  // the endpoint is unset.
  static RemoteConfig from_env();
};

// Vision chat-completions client. The wire format is confined to this class.
class RemoteAgent final : public AgentGateway {
 public:
  explicit RemoteAgent(RemoteConfig config);
  AgentReply complete(const AgentRequest& req) override;
  Provider provider() const override { return Provider::Remote; }

  // Request body as sent (exposed for tests).
  nlohmann::json build_body(const AgentRequest& req) const;

 private:
  RemoteConfig config_;
};

// Audit entry with attachment contents replaced by SHA-256 digests.
nlohmann::json redact_and_log(const AgentRequest& req, const AgentReply& reply, const RemoteConfig* remote = nullptr);

// Append-only JSONL audit file; appends are serialized.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path);
  void append(const nlohmann::json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

// Gateway decorator that writes one audit record per successful call.
class AuditedAgent final : public AgentGateway {
 public:
  AuditedAgent(AgentGateway& inner, AuditLog& log, const RemoteConfig* remote = nullptr)
      : inner_(inner), log_(log), remote_(remote) {}
  AgentReply complete(const AgentRequest& req) override;
  Provider provider() const override { return inner_.provider(); }

 private:
  AgentGateway& inner_;
  AuditLog& log_;
  const RemoteConfig* remote_;
};

// Speech seams. Text mode passes strings through unchanged.
class SpeechOutput {
 public:
  virtual ~SpeechOutput() = default;
  virtual void speak(const std::string& text) = 0;
};

class SpeechInput {
 public:
  virtual ~SpeechInput() = default;
  virtual std::string transcribe(const std::string& input) = 0;
};

class TextSpeechOutput final : public SpeechOutput {
 public:
  void speak(const std::string& text) override { spoken_.push_back(text); }
  const std::vector<std::string>& spoken() const { return spoken_; }

 private:
  std::vector<std::string> spoken_;
};

class TextSpeechInput final : public SpeechInput {
 public:
  std::string transcribe(const std::string& input) override { return input; }
};

// Number of interrogative sentences ('?' terminated) in a reply.
int count_questions(std::string_view text);

}  // namespace e2r
