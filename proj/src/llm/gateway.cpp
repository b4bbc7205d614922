#include <fstream>
#include <thread>

#include "anaforge/llm.hpp"

namespace anaforge {

namespace {

nlohmann::json record_json(const TranscriptRecord& record) {
  return {{"request_hash", record.request_hash},
          {"request", to_json(record.request)},
          {"response", to_json(record.response)},
          {"timestamp", record.timestamp}};
}

std::string last_user_text(const ChatRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it)
    if (it->role == "user") return it->text;
  return {};
}

}  // namespace

TranscriptStore::TranscriptStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TranscriptRecord record;
      record.request = chat_request_from_json(j.at("request"));
      record.response = chat_response_from_json(j.at("response"));
      record.timestamp = j.value("timestamp", std::string());
      // The stored hash is informative; the index uses the recomputed one so
      // hand-edited fixtures cannot drift from their requests.
      record.request_hash = request_hash(record.request);
      index_.emplace(record.request_hash, records_.size());
      records_.push_back(std::move(record));
    } catch (const std::exception& e) {
      throw Error(path_.string() + ":" + std::to_string(number) + ": invalid transcript record: " + e.what());
    }
  }
}

std::optional<TranscriptRecord> TranscriptStore::find(const std::string& hash) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(hash);
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

void TranscriptStore::append(const TranscriptRecord& record) {
  std::unique_lock lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to transcript " + path_.string());
  out << record_json(record).dump() << '\n';
  out.flush();
  if (!out) throw Error("failed writing transcript " + path_.string());
  index_.emplace(record.request_hash, records_.size());
  records_.push_back(record);
}

std::size_t TranscriptStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::string TranscriptStore::nearest_prompt(const ChatRequest& request) const {
  std::shared_lock lock(mutex_);
  auto wanted = last_user_text(request);
  std::string best;
  std::size_t best_len = 0;
  bool found = false;
  for (const auto& record : records_) {
    auto text = last_user_text(record.request);
    std::size_t n = 0;
    while (n < text.size() && n < wanted.size() && text[n] == wanted[n]) ++n;
    if (!found || n > best_len) {
      best = text;
      best_len = n;
      found = true;
    }
  }
  return best;
}

std::string_view to_string(GatewayMode mode) {
  switch (mode) {
    case GatewayMode::live:
      return "live";
    case GatewayMode::record:
      return "record";
    case GatewayMode::replay:
      return "replay";
  }
  return "?";
}

std::optional<GatewayMode> gateway_mode_from_string(std::string_view text) {
  if (text == "live") return GatewayMode::live;
  if (text == "record") return GatewayMode::record;
  if (text == "replay") return GatewayMode::replay;
  return std::nullopt;
}

LlmGateway::LlmGateway(GatewayMode mode, std::unique_ptr<ChatProvider> provider, std::shared_ptr<TranscriptStore> store,
                       RetryPolicy retry)
    : sleep([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      mode_(mode),
      provider_(std::move(provider)),
      store_(std::move(store)),
      retry_(retry) {
  if (mode_ != GatewayMode::replay && !provider_) throw PreconditionError("live and record modes need a provider");
  if (mode_ != GatewayMode::live && !store_) throw PreconditionError("record and replay modes need a transcript store");
}

int LlmGateway::provider_calls() const {
  std::lock_guard lock(calls_mutex_);
  return provider_calls_;
}

ChatResponse LlmGateway::call_provider(const ChatRequest& request) {
  auto backoff = retry_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    {
      std::lock_guard lock(calls_mutex_);
      ++provider_calls_;
    }
    try {
      auto response = provider_->complete(request);
      if (response.text.empty()) throw ProviderError(200, "provider returned an empty completion");
      return response;
    } catch (const ProviderError& e) {
      if (!e.transient() || attempt >= retry_.retries) throw;
    } catch (const Timeout&) {
      if (attempt >= retry_.retries) throw;
    }
    sleep(backoff);
    backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry_.multiplier));
  }
}

ChatResponse LlmGateway::complete(const ChatRequest& request) {
  request.validate();
  auto hash = request_hash(request);
  switch (mode_) {
    case GatewayMode::replay: {
      auto record = store_->find(hash);
      if (!record) throw ReplayMiss(hash, store_->nearest_prompt(request));
      return record->response;
    }
    case GatewayMode::live:
      return call_provider(request);
    case GatewayMode::record: {
      auto response = call_provider(request);
      store_->append({hash, request, response, utc_timestamp()});
      return response;
    }
  }
  throw PreconditionError("unknown gateway mode");
}

ChatResponse LlmGateway::complete_multimodal(const ChatRequest& request) {
  request.validate();
  if (!request.has_attachments()) throw PreconditionError("multimodal completion needs at least one attachment");
  if (mode_ != GatewayMode::replay && !provider_->supports_vision())
    throw UnsupportedByProvider("provider " + provider_->id() + " does not accept image input");
  return complete(request);
}

}  // namespace anaforge
