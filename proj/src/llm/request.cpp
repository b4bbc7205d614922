#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ctime>

#include "anaforge/llm.hpp"

namespace anaforge {

namespace {

bool known_role(const std::string& role) { return role == "system" || role == "user" || role == "assistant"; }

std::string excerpt(std::string text, std::size_t limit = 500) {
  if (text.size() > limit) {
    text.resize(limit);
    text += "...";
  }
  return text;
}

std::string hex(const unsigned char* bytes, unsigned length) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned i = 0; i < length; ++i) {
    out.push_back(digits[bytes[i] >> 4]);
    out.push_back(digits[bytes[i] & 0xf]);
  }
  return out;
}

}  // namespace

void ChatRequest::validate() const {
  if (messages.empty()) throw PreconditionError("chat request has no messages");
  if (!(params.temperature >= 0.0 && params.temperature <= 2.0))
    throw PreconditionError("temperature must lie in [0, 2]");
  if (!(params.top_p > 0.0 && params.top_p <= 1.0)) throw PreconditionError("top_p must lie in (0, 1]");
  if (params.max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
  for (const auto& message : messages) {
    if (!known_role(message.role)) throw PreconditionError("unknown message role '" + message.role + "'");
    if (!message.attachments.empty() && message.role != "user")
      throw PreconditionError("attachments are only allowed on user messages");
  }
}

bool ChatRequest::has_attachments() const {
  return std::any_of(messages.begin(), messages.end(), [](const ChatMessage& m) { return !m.attachments.empty(); });
}

ProviderError::ProviderError(int status, std::string body_excerpt)
    : Error("provider returned HTTP " + std::to_string(status) + ": " + excerpt(body_excerpt)),
      status_(status),
      body_(excerpt(std::move(body_excerpt))) {}

bool ProviderError::transient() const { return status_ == 408 || status_ == 409 || status_ == 429 || status_ >= 500; }

ReplayMiss::ReplayMiss(std::string hash, std::string hint)
    : Error("no recorded response for request " + hash +
            (hint.empty() ? std::string(" (transcript is empty)") : "; nearest recorded prompt begins: " + excerpt(hint, 200))),
      hash_(std::move(hash)),
      hint_(std::move(hint)) {}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  return hex(digest, length);
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::string compact;
  compact.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
  if (compact.size() % 4 != 0) throw Error("invalid base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out(compact.size() / 4 * 3);
  int written = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(compact.data()),
                                static_cast<int>(compact.size()));
  if (written < 0) throw Error("invalid base64 data");
  std::size_t padding = 0;
  if (!compact.empty() && compact.back() == '=') ++padding;
  if (compact.size() > 1 && compact[compact.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(written) - padding);
  return out;
}

namespace {

nlohmann::json params_json(const ChatParams& p) {
  return {{"temperature", p.temperature},
          {"top_p", p.top_p},
          {"model", p.model},
          {"max_tokens", p.max_tokens},
          {"sample", p.sample}};
}

}  // namespace

nlohmann::json to_json(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    nlohmann::json attachments = nlohmann::json::array();
    for (const auto& a : m.attachments) attachments.push_back(base64_encode(a));
    messages.push_back({{"role", m.role}, {"text", m.text}, {"attachments", attachments}});
  }
  return {{"messages", messages}, {"params", params_json(request.params)}};
}

ChatRequest chat_request_from_json(const nlohmann::json& j) {
  ChatRequest request;
  for (const auto& m : j.at("messages")) {
    ChatMessage message;
    message.role = m.at("role").get<std::string>();
    message.text = m.at("text").get<std::string>();
    if (m.contains("attachments"))
      for (const auto& a : m.at("attachments")) message.attachments.push_back(base64_decode(a.get<std::string>()));
    request.messages.push_back(std::move(message));
  }
  const auto& p = j.at("params");
  request.params.temperature = p.value("temperature", 0.5);
  request.params.top_p = p.value("top_p", 1.0);
  request.params.model = p.value("model", std::string());
  request.params.max_tokens = p.value("max_tokens", 4096);
  request.params.sample = p.value("sample", 0);
  return request;
}

nlohmann::json to_json(const ChatResponse& response) {
  return {{"text", response.text},
          {"usage", {{"prompt_tokens", response.usage.prompt_tokens}, {"completion_tokens", response.usage.completion_tokens}}},
          {"provider_id", response.provider_id}};
}

ChatResponse chat_response_from_json(const nlohmann::json& j) {
  ChatResponse response;
  response.text = j.at("text").get<std::string>();
  if (j.contains("usage")) {
    response.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    response.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  response.provider_id = j.value("provider_id", std::string());
  return response;
}

std::string request_hash(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    nlohmann::json attachments = nlohmann::json::array();
    for (const auto& a : m.attachments)
      attachments.push_back(sha256_hex(std::string_view(reinterpret_cast<const char*>(a.data()), a.size())));
    messages.push_back({{"role", m.role}, {"text", m.text}, {"attachments", attachments}});
  }
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  nlohmann::json canonical = {{"messages", messages}, {"params", params_json(request.params)}};
  return sha256_hex(canonical.dump());
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

}  // namespace anaforge
