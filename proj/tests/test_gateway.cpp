#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "medsynth/error.hpp"
#include "medsynth/llm_gateway.hpp"
#include "support.hpp"

using namespace medsynth;
using namespace medsynth::llm;
using json = nlohmann::json;

namespace {

std::string completion(const std::string& content) {
  return json{{"choices", json::array({json{{"message", json{{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

// Loopback chat endpoint replaying a scripted list of (status, body).
class ScriptedServer {
 public:
  explicit ScriptedServer(std::deque<std::pair<int, std::string>> script) : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard guard(mu_);
      ++hits_;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      auto [status, body] = script_.empty() ? std::pair{500, std::string("exhausted")} : script_.front();
      if (!script_.empty()) script_.pop_front();
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int hits() {
    std::lock_guard guard(mu_);
    return hits_;
  }
  std::string last_auth() {
    std::lock_guard guard(mu_);
    return last_auth_;
  }
  std::string last_body() {
    std::lock_guard guard(mu_);
    return last_body_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::deque<std::pair<int, std::string>> script_;
  int hits_ = 0;
  std::string last_auth_;
  std::string last_body_;
};

GatewayOptions real_options(const std::string& url, int retries = 3) {
  GatewayOptions o;
  o.provider = Provider::Real;
  o.config.endpoint_url = url;
  o.config.api_key_env = "MEDSYNTH_TEST_KEY";
  o.config.max_retries = retries;
  o.config.backoff_base_ms = 100;
  o.config.backoff_max_ms = 250;
  o.config.rate_limit_per_min = 100000;
  o.config.timeout_s = 5;
  return o;
}

struct KeyEnv {
  KeyEnv() { ::setenv("MEDSYNTH_TEST_KEY", "sk-test-secret", 1); }
  ~KeyEnv() { ::unsetenv("MEDSYNTH_TEST_KEY"); }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("cache_key matches an independent SHA-256 of the canonical request") {
  // Expected digests from Python: hashlib.sha256(json.dumps(obj, separators=(',', ':'),
  // ensure_ascii=False).encode()) with keys in model, temperature, max_tokens, messages order.
  ChatRequest r = user_request("Tag: h\xC3\xA9llo \"world\"", 0.7);
  CHECK(canonical_request(r) ==
        "{\"model\":\"gpt-3.5-turbo\",\"temperature\":0.7,\"max_tokens\":2048,\"messages\":[{\"role\":\"user\","
        "\"content\":\"Tag: h\xC3\xA9llo \\\"world\\\"\"}]}");
  CHECK(cache_key(r) == "251910466407e0ea84c4fe022e3982cb05e21f36dba7542cc9b8bc8d66652c8d");
  r.temperature = 0.0;
  CHECK(cache_key(r) == "36e77b5c5091f652563d0a6ef00696206af35db41d96647550e954c39dd7d2f4");
  CHECK(cache_key(request_from_json(request_to_json(r))) == cache_key(r));
}

TEST_CASE("request validation") {
  ChatRequest r = user_request("x", 0.7);
  r.temperature = 2.5;
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidArgument);
  r = user_request("", 0.7);
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidArgument);
  r.messages.clear();
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("retryable statuses") {
  for (int s : {408, 429, 500, 502, 503, 504}) CHECK(is_retryable_status(s));
  for (int s : {200, 400, 401, 403, 404, 422}) CHECK_FALSE(is_retryable_status(s));
}

TEST_CASE("gateway retries 5xx with capped jittered backoff") {
  KeyEnv key;
  ScriptedServer server({{503, "busy"}, {502, "bad gateway"}, {200, completion("Yes")}});
  Gateway gw(real_options(server.url()));
  std::vector<int64_t> waits;
  gw.set_sleeper([&](std::chrono::milliseconds d) { waits.push_back(d.count()); });
  const auto r = gw.complete(user_request("Is there a relation?", 0.0));
  CHECK(r.content == "Yes");
  CHECK(r.provider == Provider::Real);
  CHECK(server.hits() == 3);
  CHECK(gw.network_calls() == 3);
  REQUIRE(waits.size() == 2);
  CHECK(waits[0] >= 50);
  CHECK(waits[0] <= 100);
  CHECK(waits[1] >= 100);
  CHECK(waits[1] <= 200);
  CHECK(server.last_auth() == "Bearer sk-test-secret");
  CHECK(json::parse(server.last_body()).at("temperature").get<double>() == 0.0);
}

TEST_CASE("exhausted 429s surface as RateLimited") {
  KeyEnv key;
  ScriptedServer server({{429, "slow"}, {429, "slow"}, {429, "slow"}});
  Gateway gw(real_options(server.url(), 2));
  gw.set_sleeper([](auto) {});
  CHECK(code_of([&] { gw.complete(user_request("x", 0.0)); }) == ErrorCode::RateLimited);
  CHECK(server.hits() == 3);
}

TEST_CASE("non-retryable status fails at once with the provider body") {
  KeyEnv key;
  ScriptedServer server({{400, "{\"error\":\"bad\"}"}});
  Gateway gw(real_options(server.url()));
  gw.set_sleeper([](auto) {});
  try {
    gw.complete(user_request("x", 0.0));
    FAIL("expected ProviderFailure");
  } catch (const ProviderFailure& e) {
    CHECK(e.code() == ErrorCode::ProviderError);
    CHECK(e.status() == 400);
    CHECK(e.body() == "{\"error\":\"bad\"}");
  }
  CHECK(server.hits() == 1);
}

TEST_CASE("a 200 without choices is a provider error") {
  KeyEnv key;
  ScriptedServer server({{200, "{}"}});
  Gateway gw(real_options(server.url()));
  CHECK(code_of([&] { gw.complete(user_request("x", 0.0)); }) == ErrorCode::ProviderError);
}

TEST_CASE("missing API key fails before any network call") {
  ::unsetenv("MEDSYNTH_TEST_KEY");
  ScriptedServer server({{200, completion("Yes")}});
  Gateway gw(real_options(server.url()));
  CHECK(code_of([&] { gw.complete(user_request("x", 0.0)); }) == ErrorCode::MissingApiKey);
  CHECK(server.hits() == 0);
}

TEST_CASE("connection failures retry and end in TransportError") {
  KeyEnv key;
  // A port that was free a moment ago; nothing listens on it.
  int port = 0;
  {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    socklen_t len = sizeof addr;
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), len) == 0);
    REQUIRE(::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    port = ntohs(addr.sin_port);
    ::close(fd);
  }
  Gateway gw(real_options("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", 1));
  int sleeps = 0;
  gw.set_sleeper([&](auto) { ++sleeps; });
  CHECK(code_of([&] { gw.complete(user_request("x", 0.0)); }) == ErrorCode::TransportError);
  CHECK(sleeps == 1);
  CHECK(gw.network_calls() == 2);
}

TEST_CASE("disk cache short-circuits repeat requests and the transcript omits the key") {
  KeyEnv key;
  testsupport::TempDir tmp;
  ScriptedServer server({{200, completion("B-Disease")}});
  auto opts = real_options(server.url());
  opts.cache_dir = tmp / "cache";
  opts.transcript_path = tmp / "transcript.jsonl";
  {
    Gateway gw(opts);
    CHECK_FALSE(gw.complete(user_request("tag this", 0.0)).cached);
  }
  Gateway again(opts);
  const auto r = again.complete(user_request("tag this", 0.0));
  CHECK(r.cached);
  CHECK(r.content == "B-Disease");
  CHECK(server.hits() == 1);
  CHECK(again.network_calls() == 0);
  const std::string transcript = testsupport::slurp(tmp / "transcript.jsonl");
  CHECK(transcript.find("sk-test-secret") == std::string::npos);
  CHECK(transcript.find("cache-hit") != std::string::npos);
  size_t lines = 0;
  for (char c : transcript) lines += c == '\n';
  CHECK(lines == 2);
  const std::string k = cache_key(user_request("tag this", 0.0));
  CHECK(std::filesystem::exists(tmp / ("cache/" + k.substr(0, 2) + "/" + k + ".json")));
}

TEST_CASE("mock provider is a pure function of request and seed") {
  const auto req = user_request("Generate 5 sentences about asthma.", 0.7);
  CHECK(mock_complete(req, 1).content == mock_complete(req, 1).content);
  CHECK(mock_complete(req, 1).provider == Provider::Mock);
}

TEST_CASE("concurrent callers share one cache safely") {
  testsupport::TempDir tmp;
  GatewayOptions o;
  o.cache_dir = tmp / "cache";
  o.config.rate_limit_per_min = 100000;
  Gateway gw(o);
  std::vector<std::string> out(16);
  std::vector<std::thread> threads;
  for (size_t i = 0; i < out.size(); ++i) {
    threads.emplace_back([&, i] { out[i] = gw.complete(user_request("same prompt " + std::to_string(i % 2), 0.7)).content; });
  }
  for (auto& t : threads) t.join();
  for (size_t i = 2; i < out.size(); ++i) CHECK(out[i] == out[i % 2]);
}
