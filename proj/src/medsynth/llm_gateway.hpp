#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace medsynth::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct ChatRequest {
  std::string model = "gpt-3.5-turbo";
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 2048;

  // Throws InvalidArgument when the request breaks its invariants.
  void validate() const;
  // Content of the last user message.
  const std::string& prompt() const;
};

inline constexpr double kGenerationTemperature = 0.7;
inline constexpr double kTaskTemperature = 0.0;

ChatRequest user_request(std::string prompt, double temperature, std::string model = "gpt-3.5-turbo");

enum class Provider { Real, Mock };

struct ChatResponse {
  std::string content;
  Provider provider = Provider::Mock;
  bool cached = false;
  int64_t latency_ms = 0;
};

struct ProviderConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 5;
  int backoff_base_ms = 500;
  int backoff_max_ms = 30000;
  int rate_limit_per_min = 60;
  int timeout_s = 60;
};

// Canonical serialization hashed by cache_key: model, temperature,
// max_tokens, then messages in order.
std::string canonical_request(const ChatRequest& request);
std::string cache_key(const ChatRequest& request);
std::string sha256_hex(std::string_view bytes);

nlohmann::json request_to_json(const ChatRequest& request);
ChatRequest request_from_json(const nlohmann::json& j);

bool is_retryable_status(int status);

struct HttpResult {
  int status = 0;
  std::string body;
};

// One POST; throws Error{TransportError} when no HTTP response arrives.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& url, const std::map<std::string, std::string>& headers,
                          const std::string& body, std::chrono::seconds timeout) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport();

class TokenBucket {
 public:
  explicit TokenBucket(int per_minute);
  void acquire();

 private:
  std::mutex mu_;
  double capacity_;
  double tokens_;
  double per_second_;
  std::chrono::steady_clock::time_point last_;
};

// Content-addressed on-disk cache: <dir>/<key[0:2]>/<key>.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& content);

 private:
  std::mutex& lock_for(const std::string& key);

  std::string dir_;
  std::mutex table_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_locks_;
};

// Append-only JSONL; one line per provider attempt or cache hit.
class TranscriptLog {
 public:
  explicit TranscriptLog(std::string path);
  void append(const nlohmann::json& record);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
};

struct MockOptions {
  uint64_t seed = 0;
  double corruption_rate = 0.0;
};

// Deterministic stand-in for the chat service. Recognizes the pipeline's own
// prompt shapes (generation, zero-shot task, meta and augmentation prompts).
ChatResponse mock_complete(const ChatRequest& request, uint64_t seed, double corruption_rate = 0.0);

struct GatewayOptions {
  Provider provider = Provider::Mock;
  ProviderConfig config;
  MockOptions mock;
  std::optional<std::string> cache_dir;
  std::optional<std::string> transcript_path;
};

class Gateway {
 public:
  explicit Gateway(GatewayOptions options, std::unique_ptr<HttpTransport> transport = nullptr);

  // Safe for concurrent callers.
  ChatResponse complete(const ChatRequest& request);

  Provider provider() const { return options_.provider; }
  const GatewayOptions& options() const { return options_; }
  int64_t network_calls() const;

  // Injected for tests; defaults to std::this_thread::sleep_for.
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

 private:
  ChatResponse call_provider(const ChatRequest& request, const std::string& key);
  void log_attempt(const std::string& key, const ChatRequest& request, int attempt, const std::string& status,
                   const std::string& response, int64_t latency_ms);

  GatewayOptions options_;
  std::unique_ptr<HttpTransport> transport_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<TranscriptLog> transcript_;
  TokenBucket bucket_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
  mutable std::mutex stats_mu_;
  int64_t network_calls_ = 0;
};

// Pulls choices[0].message.content out of a chat-completions response body.
std::string extract_content(const std::string& body);

}  // namespace medsynth::llm
