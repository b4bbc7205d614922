#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <fstream>

#include "anaforge/llm.hpp"

namespace anaforge {

namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw PreconditionError("URL lacks a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    auto parts = split_url(request.url);
    httplib::Client client(parts.origin);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout).count();
    client.set_connection_timeout(std::max<long long>(1, std::min<long long>(seconds, 30)), 0);
    client.set_read_timeout(std::max<long long>(1, seconds), 0);
    client.set_write_timeout(std::max<long long>(1, seconds), 0);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto start = std::chrono::steady_clock::now();
    auto result = client.Post(parts.path, headers, request.body, "application/json");
    if (!result) {
      auto error = result.error();
      auto elapsed = std::chrono::steady_clock::now() - start;
      if (error == httplib::Error::ConnectionTimeout ||
          (error == httplib::Error::Read && elapsed >= request.timeout * 9 / 10))
        throw Timeout("request to " + parts.origin + " timed out");
      throw Error("HTTP request to " + parts.origin + " failed: " + httplib::to_string(error));
    }
    return {result->status, result->body};
  }
};

std::string api_key(const ProviderConfig& config) {
  if (config.api_key_env.empty()) return {};
  const char* value = std::getenv(config.api_key_env.c_str());
  if (!value || !*value)
    throw PreconditionError("provider credentials missing: set the " + config.api_key_env + " environment variable");
  return value;
}

nlohmann::json parse_body(const HttpResponse& response) {
  if (response.status < 200 || response.status >= 300) throw ProviderError(response.status, response.body);
  auto body = nlohmann::json::parse(response.body, nullptr, false);
  if (body.is_discarded()) throw ProviderError(response.status, "unparseable response body: " + response.body);
  return body;
}

std::string data_url(const std::vector<std::uint8_t>& png) { return "data:image/png;base64," + base64_encode(png); }

class OpenAiProvider : public ChatProvider {
 public:
  OpenAiProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport)
      : config_(std::move(config)), key_(api_key(config_)), transport_(std::move(transport)) {}

  ChatResponse complete(const ChatRequest& request) override {
    HttpRequest http;
    http.url = config_.base_url + "/chat/completions";
    if (!key_.empty()) http.headers.emplace_back("Authorization", "Bearer " + key_);
    http.body = openai_body(request, request.params.model.empty() ? config_.model : request.params.model).dump();
    http.timeout = config_.timeout;
    auto body = parse_body(transport_->post(http));
    ChatResponse response;
    try {
      const auto& content = body.at("choices").at(0).at("message").at("content");
      response.text = content.is_string() ? content.get<std::string>() : std::string();
    } catch (const nlohmann::json::exception&) {
      throw ProviderError(200, "response lacks choices[0].message.content: " + body.dump());
    }
    if (body.contains("usage")) {
      response.usage.prompt_tokens = body["usage"].value("prompt_tokens", 0);
      response.usage.completion_tokens = body["usage"].value("completion_tokens", 0);
    }
    response.provider_id = "openai:" + body.value("model", config_.model);
    return response;
  }
  bool supports_vision() const override { return config_.vision; }
  std::string id() const override { return "openai:" + config_.model; }

 private:
  ProviderConfig config_;
  std::string key_;
  std::shared_ptr<HttpTransport> transport_;
};

class AnthropicProvider : public ChatProvider {
 public:
  AnthropicProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport)
      : config_(std::move(config)), key_(api_key(config_)), transport_(std::move(transport)) {}

  ChatResponse complete(const ChatRequest& request) override {
    HttpRequest http;
    http.url = config_.base_url + "/messages";
    if (!key_.empty()) http.headers.emplace_back("x-api-key", key_);
    http.headers.emplace_back("anthropic-version", "2023-06-01");
    http.body = anthropic_body(request, request.params.model.empty() ? config_.model : request.params.model).dump();
    http.timeout = config_.timeout;
    auto body = parse_body(transport_->post(http));
    ChatResponse response;
    if (body.contains("content"))
      for (const auto& block : body["content"])
        if (block.value("type", "") == "text") response.text += block.value("text", "");
    if (body.contains("usage")) {
      response.usage.prompt_tokens = body["usage"].value("input_tokens", 0);
      response.usage.completion_tokens = body["usage"].value("output_tokens", 0);
    }
    response.provider_id = "anthropic:" + body.value("model", config_.model);
    return response;
  }
  bool supports_vision() const override { return config_.vision; }
  std::string id() const override { return "anthropic:" + config_.model; }

 private:
  ProviderConfig config_;
  std::string key_;
  std::shared_ptr<HttpTransport> transport_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

HttpResponse ForbiddenTransport::post(const HttpRequest& request) {
  ++attempts_;
  throw Error("network access is forbidden (attempted POST " + request.url + ")");
}

nlohmann::json openai_body(const ChatRequest& request, const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    if (m.attachments.empty()) {
      messages.push_back({{"role", m.role}, {"content", m.text}});
      continue;
    }
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", m.text}});
    for (const auto& a : m.attachments) content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(a)}}}});
    messages.push_back({{"role", m.role}, {"content", content}});
  }
  return {{"model", model},
          {"messages", messages},
          {"temperature", request.params.temperature},
          {"top_p", request.params.top_p},
          {"max_tokens", request.params.max_tokens}};
}

nlohmann::json anthropic_body(const ChatRequest& request, const std::string& model) {
  nlohmann::json body = {{"model", model}, {"max_tokens", request.params.max_tokens},
                         {"temperature", request.params.temperature}};
  // Some models reject temperature and top_p together; send top_p only when
  // it actually restricts sampling.
  if (request.params.top_p < 1.0) body["top_p"] = request.params.top_p;
  std::string system;
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    if (m.role == "system") {
      system += (system.empty() ? "" : "\n\n") + m.text;
      continue;
    }
    nlohmann::json content = nlohmann::json::array();
    for (const auto& a : m.attachments)
      content.push_back({{"type", "image"},
                         {"source", {{"type", "base64"}, {"media_type", "image/png"}, {"data", base64_encode(a)}}}});
    content.push_back({{"type", "text"}, {"text", m.text}});
    messages.push_back({{"role", m.role}, {"content", content}});
  }
  if (!system.empty()) body["system"] = system;
  body["messages"] = messages;
  return body;
}

ScriptedProvider::ScriptedProvider(std::vector<Rule> rules, bool vision) : rules_(std::move(rules)), vision_(vision) {}

std::vector<ScriptedProvider::Rule> ScriptedProvider::load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open script file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid script file " + path.string() + ": " + e.what());
  }
  std::vector<Rule> rules;
  for (const auto& r : j) {
    Rule rule;
    rule.match = r.value("match", std::string());
    if (r.contains("response_file")) {
      auto file = path.parent_path() / r["response_file"].get<std::string>();
      std::ifstream f(file, std::ios::binary);
      if (!f) throw Error("cannot open scripted response " + file.string());
      rule.response.assign(std::istreambuf_iterator<char>(f), {});
    } else {
      rule.response = r.at("response").get<std::string>();
    }
    if (r.contains("sample")) rule.sample = r["sample"].get<int>();
    rules.push_back(std::move(rule));
  }
  return rules;
}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
  std::string prompt;
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it)
    if (it->role == "user") {
      prompt = it->text;
      break;
    }
  for (const auto& rule : rules_) {
    if (rule.sample && *rule.sample != request.params.sample) continue;
    if (prompt.find(rule.match) == std::string::npos) continue;
    ChatResponse response;
    response.text = rule.response;
    response.usage.prompt_tokens = static_cast<int>(prompt.size() / 4);
    response.usage.completion_tokens = static_cast<int>(rule.response.size() / 4);
    response.provider_id = "scripted";
    return response;
  }
  throw ProviderError(404, "no scripted response matches the prompt");
}

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& config, std::shared_ptr<HttpTransport> transport) {
  if (!transport) transport = make_http_transport();
  switch (config.kind) {
    case ProviderKind::openai:
      return std::make_unique<OpenAiProvider>(config, std::move(transport));
    case ProviderKind::anthropic:
      return std::make_unique<AnthropicProvider>(config, std::move(transport));
    case ProviderKind::scripted:
      return std::make_unique<ScriptedProvider>(ScriptedProvider::load_rules(config.script), config.vision);
  }
  throw PreconditionError("unknown provider kind");
}

}  // namespace anaforge
