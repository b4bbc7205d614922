#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "anaforge/error.hpp"

namespace anaforge {

// ---------------------------------------------------------------------------
// Requests and responses

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string text;
  /// Image bytes (PNG); allowed on user messages only.
  std::vector<std::vector<std::uint8_t>> attachments;
};

struct ChatParams {
  double temperature = 0.5;
  double top_p = 1.0;
  std::string model;
  int max_tokens = 4096;
  /// Sample index for repeated identical prompts (Pass@k attempts). Part of
  /// the request identity, never sent to the provider.
  int sample = 0;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  ChatParams params;

  /// Throws PreconditionError: temperature outside [0, 2], attachments on a
  /// non-user message, unknown role, or no messages.
  void validate() const;
  bool has_attachments() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  Usage usage;
  std::string provider_id;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, std::string body_excerpt);
  int status() const { return status_; }
  const std::string& body_excerpt() const { return body_; }
  /// 408, 409, 429 and 5xx are worth retrying.
  bool transient() const;

 private:
  int status_;
  std::string body_;
};

class ReplayMiss : public Error {
 public:
  ReplayMiss(std::string hash, std::string hint);
  const std::string& hash() const { return hash_; }
  const std::string& hint() const { return hint_; }

 private:
  std::string hash_;
  std::string hint_;
};

class Timeout : public Error {
 public:
  using Error::Error;
};

class UnsupportedByProvider : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Canonical form and hashing

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Decodes base64, ignoring whitespace. Throws Error on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Full request as stored in transcripts (attachments as base64).
nlohmann::json to_json(const ChatRequest& request);
ChatRequest chat_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChatResponse& response);
ChatResponse chat_response_from_json(const nlohmann::json& j);

/// Hex SHA-256 of the canonical request: sorted keys, attachments replaced
/// by the SHA-256 of their bytes.
std::string request_hash(const ChatRequest& request);

// ---------------------------------------------------------------------------
// Transport and providers

struct HttpRequest {
  std::string url;  // absolute, e.g. https://api.openai.com/v1/chat/completions
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{120'000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Network seam: tests inject transports that record or refuse calls.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Throws Timeout when the deadline passes, Error on connection failure.
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// HTTPS client (cpp-httplib with OpenSSL).
std::shared_ptr<HttpTransport> make_http_transport();

/// A transport that throws on any use (asserts zero network activity).
class ForbiddenTransport : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override;
  int attempts() const { return attempts_; }

 private:
  int attempts_ = 0;
};

enum class ProviderKind { openai, anthropic, scripted };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::openai;
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4.1";
  /// Environment variable holding the API key.
  std::string api_key_env = "OPENAI_API_KEY";
  bool vision = true;
  std::chrono::milliseconds timeout{120'000};
  /// Scripted provider: rules file (JSON list of {match, response}).
  std::filesystem::path script;
};

/// One chat-completions style backend.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual bool supports_vision() const = 0;
  virtual std::string id() const = 0;
};

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& config, std::shared_ptr<HttpTransport> transport);

/// Request bodies in each provider's schema (exposed for tests).
nlohmann::json openai_body(const ChatRequest& request, const std::string& model);
nlohmann::json anthropic_body(const ChatRequest& request, const std::string& model);

/// Deterministic offline provider answering from ordered substring rules:
/// the first rule whose `match` occurs in the last user message wins. Used to
/// author transcript fixtures through the normal record path.
class ScriptedProvider : public ChatProvider {
 public:
  struct Rule {
    std::string match;
    std::string response;
    /// Restricts the rule to one request sample index when set.
    std::optional<int> sample;
  };
  explicit ScriptedProvider(std::vector<Rule> rules, bool vision = true);
  static std::vector<Rule> load_rules(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& request) override;
  bool supports_vision() const override { return vision_; }
  std::string id() const override { return "scripted"; }

 private:
  std::vector<Rule> rules_;
  bool vision_;
};

// ---------------------------------------------------------------------------
// Transcript store

struct TranscriptRecord {
  std::string request_hash;
  ChatRequest request;
  ChatResponse response;
  std::string timestamp;  // ISO-8601 UTC
};

/// Append-only JSON-lines file; an in-memory index answers lookups.
class TranscriptStore {
 public:
  /// Loads `path` if it exists (a missing file is an empty store).
  explicit TranscriptStore(std::filesystem::path path);

  std::optional<TranscriptRecord> find(const std::string& hash) const;
  /// Appends one record (serialised writer) and indexes it.
  void append(const TranscriptRecord& record);
  std::size_t size() const;
  /// Text of the recorded request whose last user message shares the
  /// longest prefix with `request`'s; empty when the store is empty.
  std::string nearest_prompt(const ChatRequest& request) const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::vector<TranscriptRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;  // first record per hash
};

// ---------------------------------------------------------------------------
// Gateway

enum class GatewayMode { live, record, replay };
std::string_view to_string(GatewayMode mode);
std::optional<GatewayMode> gateway_mode_from_string(std::string_view text);

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

class LlmGateway {
 public:
  /// `provider` may be null in replay mode; `store` is required for record
  /// and replay.
  LlmGateway(GatewayMode mode, std::unique_ptr<ChatProvider> provider, std::shared_ptr<TranscriptStore> store,
             RetryPolicy retry = {});

  ChatResponse complete(const ChatRequest& request);
  /// Requires at least one attachment; UnsupportedByProvider when the
  /// configured model lacks vision (live and record modes).
  ChatResponse complete_multimodal(const ChatRequest& request);

  GatewayMode mode() const { return mode_; }
  /// Calls that reached the provider (including retries).
  int provider_calls() const;

  /// Sleep hook for retry backoff (tests replace it).
  std::function<void(std::chrono::milliseconds)> sleep;

 private:
  ChatResponse call_provider(const ChatRequest& request);

  GatewayMode mode_;
  std::unique_ptr<ChatProvider> provider_;
  std::shared_ptr<TranscriptStore> store_;
  RetryPolicy retry_;
  mutable std::mutex calls_mutex_;
  int provider_calls_ = 0;
};

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

}  // namespace anaforge
