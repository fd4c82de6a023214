/*
 * Copyright 2026 The TurnPilot Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

// Must match how the core compiled httplib.
#ifdef TURNPILOT_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

#include "oracles.hpp"
#include "turnpilot/error.hpp"
#include "turnpilot/providers.hpp"

using namespace turnpilot;
using namespace turnpilot::providers;
using nlohmann::json;

namespace {

RetryPolicy no_sleep(int attempts = 3) {
  RetryPolicy r;
  r.attempts = attempts;
  r.sleeper = [](std::chrono::microseconds) {};
  return r;
}

class FlakyBackend final : public ChatBackend {
 public:
  explicit FlakyBackend(int failures, bool remote = false) : failures_(failures), remote_(remote) {}
  std::string provider_id() const override { return "flaky"; }
  bool is_remote() const override { return remote_; }
  ChatResponse complete(const ChatRequest& r) override {
    ++calls;
    if (failures_ < 0 || calls <= failures_) throw TransientError("simulated outage");
    return {"ok: " + r.prompt, 2, 5.0};
  }
  int calls = 0;

 private:
  int failures_;
  bool remote_;
};

// Counts how many calls are inside complete() at once.
class CountingBackend final : public ChatBackend {
 public:
  std::string provider_id() const override { return "counting"; }
  bool is_remote() const override { return true; }
  ChatResponse complete(const ChatRequest&) override {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    return {"x", 1, 0.0};
  }
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

// OpenAI-shaped test server on a random local port.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = json::parse(req.body);
      if (!statuses.empty()) {
        const int s = statuses.front();
        statuses.pop_front();
        res.status = s;
        res.set_content(R"({"error": {"message": "scripted failure"}})", "application/json");
        return;
      }
      const std::string prompt = last_body["messages"][0]["content"];
      json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo " + prompt}}}}}},
                    {"usage", {{"completion_tokens", 7}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      ++hits;
      last_body = json::parse(req.body);
      json reply = {{"data", {{{"embedding", {0.6, 0.8, 0.0}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  std::deque<int> statuses;
  int hits = 0;
  std::string last_auth;
  json last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
};

}  // namespace

TEST_CASE("mock backend returns canned text and counts invocations") {
  MockChatBackend mock(std::map<std::string, std::string>{{"who wrote hamlet", "William Shakespeare wrote Hamlet."}});
  ChatRequest req{"who wrote hamlet", "gpt-4"};
  auto r = chat_complete(req, mock);
  CHECK(r.text == "William Shakespeare wrote Hamlet.");
  CHECK(r.token_count == 4);
  CHECK(mock.invocations() == 1);
  CHECK(code_of([&] { chat_complete({"unknown", "gpt-4"}, mock); }) == ErrorCode::kProviderRejection);

  MockChatBackend echo({}, true);
  CHECK(chat_complete({"anything", "m"}, echo).text == "Regarding anything: I do not have a recorded answer.");
}

TEST_CASE("mock recording loads the shipped fixture") {
  auto mock = MockChatBackend::from_recording(std::filesystem::path(TP_DATA_DIR) / "fixtures/recorded_responses.jsonl");
  CHECK_NOTHROW(mock.complete({"who wrote the play romeo and juliet", "gpt-4"}));
}

TEST_CASE("second identical request is a cache hit") {
  tpt::TempDir dir;
  ResponseCache cache(dir.path());
  MockChatBackend mock(std::map<std::string, std::string>{{"who wrote hamlet", "William Shakespeare wrote Hamlet."}});
  CallPolicy policy;
  policy.cache = &cache;
  ChatRequest req{"who wrote hamlet", "gpt-4"};
  auto first = chat_complete(req, mock, policy);
  auto second = chat_complete(req, mock, policy);
  CHECK(first.text == second.text);
  CHECK(first.token_count == second.token_count);
  CHECK(second.provider_latency_ms == 0.0);
  CHECK(mock.invocations() == 1);
  CHECK(cache.hits() == 1);
  CHECK(cache.misses() == 1);
}

TEST_CASE("cache keys include the sampling parameters") {
  ChatRequest a{"same prompt", "gpt-4", 0.0, 256};
  ChatRequest b{"same prompt", "gpt-4", 0.7, 256};
  ChatRequest c{"same prompt", "gpt-4", 0.0, 64};
  CHECK(chat_cache_key("p", a) != chat_cache_key("p", b));
  CHECK(chat_cache_key("p", a).address() != chat_cache_key("p", b).address());
  CHECK(chat_cache_key("p", a) != chat_cache_key("p", c));
  CHECK(chat_cache_key("p", a) == chat_cache_key("p", a));
  CHECK(chat_cache_key("p", a) != chat_cache_key("q", a));
}

TEST_CASE("cached(): miss then hit computes once") {
  tpt::TempDir dir;
  ResponseCache cache(dir.path());
  CacheKey key{"p", "m", "d", "x"};
  int computes = 0;
  auto fn = [&] {
    ++computes;
    return json{{"v", 1}};
  };
  CHECK(cache.cached(key, fn) == json{{"v", 1}});
  CHECK(cache.cached(key, fn) == json{{"v", 1}});
  CHECK(computes == 1);
  const json record = json::parse(tpt::read_text(cache.record_path(key)));
  for (const char* field : {"provider_id", "model_id", "parameter_digest", "prompt_digest", "value", "checksum", "created_at"})
    CHECK(record.contains(field));
}

TEST_CASE("corrupted cache record is recomputed and repaired") {
  tpt::TempDir dir;
  ResponseCache cache(dir.path());
  CacheKey key{"p", "m", "d", "x"};
  int computes = 0;
  auto fn = [&] {
    ++computes;
    return json{{"v", computes}};
  };
  cache.cached(key, fn);

  auto record = json::parse(tpt::read_text(cache.record_path(key)));
  record["value"] = json{{"v", 999}};  // checksum no longer matches
  tpt::write_text(cache.record_path(key), record.dump());
  CHECK(code_of([&] { cache.lookup(key); }) == ErrorCode::kCacheCorrupt);
  CHECK(cache.cached(key, fn) == json{{"v", 2}});
  CHECK(cache.repaired() == 1);
  CHECK(cache.lookup(key) == json{{"v", 2}});

  tpt::write_text(cache.record_path(key), "{ torn");
  CHECK(cache.cached(key, fn) == json{{"v", 3}});
  CHECK(cache.repaired() == 2);
}

TEST_CASE("cache soundness: value after caching equals value before") {
  tpt::TempDir dir;
  ResponseCache cache(dir.path());
  HashedBagEmbedder embedder;
  CallPolicy policy;
  policy.cache = &cache;
  for (const char* text : {"alpha beta", "one two three two", "Ünïcode façade 42"}) {
    auto direct = embedder.embed(text);
    auto miss = embed_text(text, embedder, policy);
    auto hit = embed_text(text, embedder, policy);
    CHECK(direct == miss);
    CHECK(direct == hit);
  }
}

TEST_CASE("concurrent writers on one key leave a valid record") {
  tpt::TempDir dir;
  ResponseCache cache(dir.path());
  CacheKey key{"p", "m", "d", "race"};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) cache.store(key, json{{"v", "same"}});
    });
  for (auto& th : threads) th.join();
  CHECK(cache.lookup(key) == json{{"v", "same"}});
}

TEST_CASE("retries: always failing backend gives Timeout after 3 attempts") {
  FlakyBackend backend(-1);
  CallPolicy policy;
  std::vector<std::chrono::microseconds> slept;
  policy.retry = no_sleep(3);
  policy.retry.sleeper = [&](std::chrono::microseconds d) { slept.push_back(d); };
  try {
    chat_complete({"q", "m"}, backend, policy);
    FAIL("expected Timeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTimeout);
    CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
  }
  CHECK(backend.calls == 3);
  REQUIRE(slept.size() == 2);
  CHECK(slept[0].count() >= 800000);
  CHECK(slept[0].count() <= 1200000);
  CHECK(slept[1].count() >= 1600000);
  CHECK(slept[1].count() <= 2400000);
}

TEST_CASE("retries: transient failure then success") {
  FlakyBackend backend(2);
  CallPolicy policy;
  policy.retry = no_sleep(3);
  CHECK(chat_complete({"q", "m"}, backend, policy).text == "ok: q");
  CHECK(backend.calls == 3);
}

TEST_CASE("backoff schedule: 1s, 2s, 4s within 20 percent, deterministic") {
  RetryPolicy p;
  for (int retry = 0; retry < 3; ++retry) {
    const double base = 1e6 * std::ldexp(1.0, retry);
    for (std::uint64_t salt = 0; salt < 50; ++salt) {
      const auto d = static_cast<double>(backoff_delay(p, retry, salt).count());
      CHECK(d >= base * 0.8 - 1);
      CHECK(d <= base * 1.2 + 1);
      CHECK(backoff_delay(p, retry, salt) == backoff_delay(p, retry, salt));
    }
  }
}

TEST_CASE("deterministic embedder") {
  HashedBagEmbedder e;
  CHECK(code_of([&] { embed_text("", e); }) == ErrorCode::kEmptyInput);
  CHECK(code_of([&] { embed_text("   ", e); }) == ErrorCode::kEmptyInput);
  auto v = e.embed("Some non-empty text, with punctuation!");
  CHECK(v.dim() == 256);
  double n2 = 0.0;
  for (double x : v.values) n2 += x * x;
  CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-9);
  CHECK(v.normalized);

  // "hello hello" is twice the count vector of "hello": identical after normalizing.
  auto a = e.embed("hello hello"), b = e.embed("hello");
  CHECK(tpt::oracle_cosine(a.values, b.values) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a == e.embed("HELLO, hello"));
}

TEST_CASE("token bucket: no 1 s window exceeds ceil(R) + B on a simulated clock") {
  for (auto [rate, burst] : std::vector<std::pair<double, double>>{{2.0, 1.0}, {5.0, 3.0}, {0.5, 2.0}, {2.5, 4.0}}) {
    double now = 100.0;
    TokenBucket bucket(
        rate, burst, [&] { return now; }, [&](std::chrono::microseconds d) { now += d.count() * 1e-6; });
    std::vector<double> stamps;
    for (int i = 0; i < 60; ++i) {
      bucket.acquire();
      stamps.push_back(now);
      if (i % 7 == 0) now += 0.3;  // idle gaps let the bucket refill
    }
    const auto cap = static_cast<std::size_t>(std::ceil(rate) + burst);
    for (std::size_t i = 0; i < stamps.size(); ++i) {
      std::size_t in_window = 0;
      for (std::size_t j = i; j < stamps.size() && stamps[j] < stamps[i] + 1.0; ++j) ++in_window;
      CHECK(in_window <= cap);
    }
  }
  CHECK_THROWS(TokenBucket(0.0, 1.0));
  CHECK_THROWS(TokenBucket(1.0, 0.5));
}

TEST_CASE("rate limiter is consulted only for remote backends") {
  double now = 0.0;
  int sleeps = 0;
  TokenBucket bucket(
      1.0, 1.0, [&] { return now; },
      [&](std::chrono::microseconds d) {
        ++sleeps;
        now += d.count() * 1e-6;
      });
  CallPolicy policy;
  policy.limiter = &bucket;
  FlakyBackend local(0, false), remote(0, true);
  for (int i = 0; i < 3; ++i) chat_complete({"q", "m"}, local, policy);
  CHECK(sleeps == 0);
  for (int i = 0; i < 3; ++i) chat_complete({"q", "m"}, remote, policy);
  CHECK(sleeps == 2);
  CHECK(now >= 2.0);
}

TEST_CASE("concurrency gate bounds in-flight remote calls") {
  CountingBackend backend;
  ConcurrencyGate gate(3);
  CallPolicy policy;
  policy.gate = &gate;
  std::vector<std::thread> threads;
  for (int t = 0; t < 12; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 4; ++i) chat_complete({"q", "m"}, backend, policy);
    });
  for (auto& th : threads) th.join();
  CHECK(backend.peak.load() <= 3);
  CHECK(backend.peak.load() >= 1);
  CHECK(backend.in_flight.load() == 0);
  CHECK_THROWS(ConcurrencyGate(0));
}

TEST_CASE("credentials come from the environment") {
  ::unsetenv("TP_TEST_MISSING_KEY");
  try {
    require_credential("TP_TEST_MISSING_KEY");
    FAIL("expected MissingCredentials");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingCredentials);
    CHECK(std::string(e.what()).find("TP_TEST_MISSING_KEY") != std::string::npos);
  }
  ::setenv("TP_TEST_PRESENT_KEY", "s3cret", 1);
  CHECK(require_credential("TP_TEST_PRESENT_KEY") == "s3cret");
}

TEST_CASE("remote chat backend against a local server") {
  FakeServer server;
  RemoteChatBackend chat({server.url("/v1/chat/completions"), "gpt-4", "k-123", std::chrono::milliseconds(5000)});
  CallPolicy policy;
  policy.retry = no_sleep(3);

  auto r = chat_complete({"who wrote hamlet", "gpt-4", 0.0, 256}, chat, policy);
  CHECK(r.text == "echo who wrote hamlet");
  CHECK(r.token_count == 7);
  CHECK(server.last_auth == "Bearer k-123");
  CHECK(server.last_body["temperature"] == 0.0);
  CHECK(server.last_body["max_tokens"] == 256);
  CHECK(server.last_body["messages"].size() == 1);
  CHECK(server.last_body["messages"][0]["role"] == "user");

  server.statuses = {500, 429};
  CHECK(chat_complete({"retry me", "gpt-4"}, chat, policy).text == "echo retry me");

  server.statuses = {503, 503, 503};
  CHECK(code_of([&] { chat_complete({"q", "gpt-4"}, chat, policy); }) == ErrorCode::kTimeout);

  server.statuses = {401};
  CHECK(code_of([&] { chat_complete({"q", "gpt-4"}, chat, policy); }) == ErrorCode::kAuthFailure);

  server.statuses = {400};
  try {
    chat_complete({"q", "gpt-4"}, chat, policy);
    FAIL("expected ProviderRejection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kProviderRejection);
    CHECK(std::string(e.what()).find("scripted failure") != std::string::npos);
  }
}

TEST_CASE("remote embedding backend against a local server") {
  FakeServer server;
  RemoteEmbeddingBackend embed({server.url("/v1/embeddings"), std::string(kDefaultEmbeddingModel), "k", std::chrono::milliseconds(5000)});
  auto v = embed_text("hello", embed);
  CHECK(v.values == std::vector<double>{0.6, 0.8, 0.0});
  CHECK(server.last_body["model"] == std::string(kDefaultEmbeddingModel));
  CHECK(server.last_body["input"] == "hello");
}

TEST_CASE("unreachable endpoint is retried then times out") {
  RemoteChatBackend chat({"http://127.0.0.1:1/v1/chat/completions", "m", "", std::chrono::milliseconds(200)});
  CallPolicy policy;
  policy.retry = no_sleep(2);
  CHECK(code_of([&] { chat_complete({"q", "m"}, chat, policy); }) == ErrorCode::kTimeout);
  CHECK_THROWS_AS(RemoteChatBackend({"not a url", "m", "", {}}), Error);
}
