#include "medsynth/llm_gateway.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "medsynth/error.hpp"

namespace medsynth::llm {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

namespace {

Role parse_role(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw Error(ErrorCode::InvalidArgument, "unknown role '" + s + "'");
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace

void ChatRequest::validate() const {
  if (model.empty()) throw Error(ErrorCode::InvalidArgument, "request model is empty");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
  }
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
  bool has_user = false;
  for (const auto& m : messages) {
    if (m.content.empty()) throw Error(ErrorCode::InvalidArgument, "message content is empty");
    has_user = has_user || m.role == Role::User;
  }
  if (!has_user) throw Error(ErrorCode::InvalidArgument, "request has no user message");
}

const std::string& ChatRequest::prompt() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  throw Error(ErrorCode::InvalidArgument, "request has no user message");
}

ChatRequest user_request(std::string prompt, double temperature, std::string model) {
  ChatRequest r;
  r.model = std::move(model);
  r.temperature = temperature;
  r.messages.push_back(ChatMessage{Role::User, std::move(prompt)});
  return r;
}

json request_to_json(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back(json{{"role", to_string(m.role)}, {"content", m.content}});
  }
  return json{{"model", request.model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
}

ChatRequest request_from_json(const json& j) {
  ChatRequest r;
  r.model = j.at("model").get<std::string>();
  r.temperature = j.value("temperature", 0.7);
  r.max_tokens = j.value("max_tokens", 2048);
  for (const auto& m : j.at("messages")) {
    r.messages.push_back(ChatMessage{parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  return r;
}

std::string canonical_request(const ChatRequest& request) {
  nlohmann::ordered_json j;
  j["model"] = request.model;
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_tokens;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : request.messages) {
    nlohmann::ordered_json msg;
    msg["role"] = to_string(m.role);
    msg["content"] = m.content;
    j["messages"].push_back(std::move(msg));
  }
  return j.dump();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string cache_key(const ChatRequest& request) { return sha256_hex(canonical_request(request)); }

bool is_retryable_status(int status) {
  switch (status) {
    case 408:
    case 429:
    case 500:
    case 502:
    case 503:
    case 504: return true;
    default: return false;
  }
}

std::string extract_content(const std::string& body) {
  try {
    const json j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ProviderFailure(200, body);
  }
}

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResult post(const std::string& url, const std::map<std::string, std::string>& headers, const std::string& body,
                  std::chrono::seconds timeout) override {
    const size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "endpoint URL lacks a scheme: " + url);
    const size_t path_start = url.find('/', scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) throw Error(ErrorCode::TransportError, "POST " + origin + path + ": " + httplib::to_string(res.error()));
    return HttpResult{res->status, res->body};
  }
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport() { return std::make_unique<HttplibTransport>(); }

TokenBucket::TokenBucket(int per_minute)
    : capacity_(std::max(1, per_minute)),
      tokens_(capacity_),
      per_second_(std::max(1, per_minute) / 60.0),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * per_second_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait_s = (1.0 - tokens_) / per_second_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
    lock.lock();
  }
}

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const fs::path path = fs::path(dir_) / key.substr(0, 2) / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    const json j = json::parse(ss.str());
    if (j.value("key", "") != key) return std::nullopt;
    return j.at("content").get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::mutex& ResponseCache::lock_for(const std::string& key) {
  std::lock_guard guard(table_mu_);
  auto& slot = key_locks_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void ResponseCache::put(const std::string& key, const std::string& content) {
  std::lock_guard guard(lock_for(key));
  const fs::path dir = fs::path(dir_) / key.substr(0, 2);
  fs::create_directories(dir);
  const fs::path final_path = dir / (key + ".json");
  const fs::path tmp = dir / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write cache entry " + tmp.string());
    out << json{{"key", key}, {"content", content}}.dump() << '\n';
  }
  fs::rename(tmp, final_path);
}

TranscriptLog::TranscriptLog(std::string path) : path_(std::move(path)) {
  const auto parent = fs::path(path_).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void TranscriptLog::append(const json& record) {
  std::lock_guard guard(mu_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to transcript " + path_);
  out << record.dump() << '\n';
}

Gateway::Gateway(GatewayOptions options, std::unique_ptr<HttpTransport> transport)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      bucket_(options_.config.rate_limit_per_min),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (options_.cache_dir) cache_ = std::make_unique<ResponseCache>(*options_.cache_dir);
  if (options_.transcript_path) transcript_ = std::make_unique<TranscriptLog>(*options_.transcript_path);
  if (options_.provider == Provider::Real && !transport_) transport_ = make_httplib_transport();
}

int64_t Gateway::network_calls() const {
  std::lock_guard guard(stats_mu_);
  return network_calls_;
}

void Gateway::log_attempt(const std::string& key, const ChatRequest& request, int attempt, const std::string& status,
                          const std::string& response, int64_t latency_ms) {
  if (!transcript_) return;
  transcript_->append(json{{"timestamp", iso_timestamp()},
                           {"digest", key},
                           {"provider", options_.provider == Provider::Real ? "real" : "mock"},
                           {"attempt", attempt},
                           {"status", status},
                           {"latency_ms", latency_ms},
                           {"request", request_to_json(request)},
                           {"response", response}});
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  request.validate();
  const std::string key = cache_key(request);
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      log_attempt(key, request, 0, "cache-hit", *hit, 0);
      return ChatResponse{*hit, options_.provider, true, 0};
    }
  }
  ChatResponse response = call_provider(request, key);
  if (cache_) cache_->put(key, response.content);
  return response;
}

ChatResponse Gateway::call_provider(const ChatRequest& request, const std::string& key) {
  if (options_.provider == Provider::Mock) {
    {
      std::lock_guard guard(stats_mu_);
      ++network_calls_;
    }
    ChatResponse r = mock_complete(request, options_.mock.seed, options_.mock.corruption_rate);
    log_attempt(key, request, 1, "200", r.content, 0);
    return r;
  }

  const ProviderConfig& cfg = options_.config;
  const char* api_key = std::getenv(cfg.api_key_env.c_str());
  if (api_key == nullptr || *api_key == '\0') {
    throw Error(ErrorCode::MissingApiKey, "environment variable " + cfg.api_key_env + " is not set");
  }
  const std::map<std::string, std::string> headers{{"Authorization", std::string("Bearer ") + api_key}};
  const std::string body = request_to_json(request).dump();

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  enum class Last { None, Transport, Status } last = Last::None;
  int last_status = 0;
  std::string last_body;
  std::string last_transport_error;

  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      const double cap = std::min<double>(cfg.backoff_max_ms, cfg.backoff_base_ms * std::ldexp(1.0, attempt - 1));
      std::uniform_real_distribution<double> jitter(cap / 2, cap);
      sleeper_(std::chrono::milliseconds(static_cast<int64_t>(jitter(jitter_rng))));
    }
    bucket_.acquire();
    {
      std::lock_guard guard(stats_mu_);
      ++network_calls_;
    }
    const auto t0 = std::chrono::steady_clock::now();
    HttpResult res;
    try {
      res = transport_->post(cfg.endpoint_url, headers, body, std::chrono::seconds(cfg.timeout_s));
    } catch (const Error& e) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
      log_attempt(key, request, attempt + 1, "transport-error", e.what(), ms.count());
      if (e.code() != ErrorCode::TransportError) throw;
      last = Last::Transport;
      last_transport_error = e.what();
      continue;
    }
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    log_attempt(key, request, attempt + 1, std::to_string(res.status), res.body, latency);
    if (res.status >= 200 && res.status < 300) {
      return ChatResponse{extract_content(res.body), Provider::Real, false, latency};
    }
    if (!is_retryable_status(res.status)) throw ProviderFailure(res.status, res.body);
    last = Last::Status;
    last_status = res.status;
    last_body = res.body;
  }

  if (last == Last::Transport) {
    throw Error(ErrorCode::TransportError, "retries exhausted: " + last_transport_error);
  }
  if (last_status == 429) {
    throw Error(ErrorCode::RateLimited, "rate limited after " + std::to_string(cfg.max_retries + 1) + " attempts");
  }
  throw ProviderFailure(last_status, last_body);
}

}  // namespace medsynth::llm
