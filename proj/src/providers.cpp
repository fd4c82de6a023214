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

#include "turnpilot/providers.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <thread>

#ifdef TURNPILOT_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "turnpilot/error.hpp"
#include "turnpilot/hash.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/log.hpp"
#include "turnpilot/text.hpp"

namespace turnpilot::providers {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Keys and records

std::string CacheKey::address() const {
  std::string joined = provider_id;
  for (const std::string* part : {&model_id, &parameter_digest, &prompt_digest}) {
    joined += '\x1f';
    joined += *part;
  }
  return digest128(joined);
}

CacheKey chat_cache_key(std::string_view provider_id, const ChatRequest& request) {
  json params = {{"temperature", request.temperature}, {"max_tokens", request.max_tokens}};
  return {std::string(provider_id), request.model_id, digest128(io::canonical(params)),
          digest128(request.prompt)};
}

CacheKey embedding_cache_key(std::string_view provider_id, std::string_view model_id,
                             std::string_view text) {
  return {std::string(provider_id), std::string(model_id), digest128("{}"), digest128(text)};
}

json to_json(const ChatResponse& r) {
  return {{"text", r.text},
          {"token_count", r.token_count},
          {"provider_latency_ms", r.provider_latency_ms}};
}

ChatResponse chat_response_from_json(const json& j) {
  return {j.at("text").get<std::string>(), j.at("token_count").get<int>(),
          j.value("provider_latency_ms", 0.0)};
}

json to_json(const EmbeddingVector& v) {
  return {{"dim", v.dim()}, {"values", v.values}, {"normalized", v.normalized}};
}

EmbeddingVector embedding_from_json(const json& j) {
  EmbeddingVector v{j.at("values").get<std::vector<double>>(), j.at("normalized").get<bool>()};
  if (v.dim() != j.at("dim").get<std::size_t>())
    fail(ErrorCode::kMalformedRecord, "embedding dim does not match its values");
  return v;
}

// ---------------------------------------------------------------------------
// Offline backends

MockChatBackend::MockChatBackend(std::map<std::string, std::string> canned, bool echo_unknown)
    : canned_(std::move(canned)), echo_unknown_(echo_unknown) {}

MockChatBackend MockChatBackend::from_recording(const std::filesystem::path& path,
                                                bool echo_unknown) {
  std::map<std::string, std::string> canned;
  io::for_each_jsonl(path, [&](const json& r, std::size_t line) {
    auto [it, inserted] =
        canned.emplace(r.at("prompt").get<std::string>(), r.at("text").get<std::string>());
    if (!inserted && it->second != r.at("text").get<std::string>())
      fail(ErrorCode::kMalformedRecord, path.string() + ":" + std::to_string(line) +
                                            ": conflicting answers for prompt '" + it->first + "'");
  });
  return MockChatBackend(std::move(canned), echo_unknown);
}

ChatResponse MockChatBackend::complete(const ChatRequest& request) {
  invocations_.fetch_add(1);
  ChatResponse r;
  if (auto it = canned_.find(request.prompt); it != canned_.end()) {
    r.text = it->second;
  } else if (echo_unknown_) {
    r.text = "Regarding " + request.prompt + ": I do not have a recorded answer.";
  } else {
    fail(ErrorCode::kProviderRejection, "mock backend has no answer for '" + request.prompt + "'");
  }
  r.token_count = static_cast<int>(text::word_count(r.text));
  return r;
}

std::size_t HashedBagEmbedder::bin_of(std::string_view token) noexcept {
  return static_cast<std::size_t>(stable_hash(token) % kDim);
}

EmbeddingVector HashedBagEmbedder::embed(std::string_view input) {
  auto tokens = text::alnum_tokens(input);
  if (tokens.empty()) fail(ErrorCode::kEmptyInput, "text has no alphanumeric tokens");
  EmbeddingVector v{std::vector<double>(kDim, 0.0), true};
  for (const auto& t : tokens) v.values[bin_of(t)] += 1.0;
  double norm2 = 0.0;
  for (double x : v.values) norm2 += x * x;
  const double norm = std::sqrt(norm2);
  for (double& x : v.values) x /= norm;
  return v;
}

// ---------------------------------------------------------------------------
// Remote backends

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    fail(ErrorCode::kConfig, "endpoint '" + url + "' is not an absolute URL");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

json post_json(const RemoteConfig& config, const json& body, double* latency_ms) {
  Url url = split_url(config.endpoint);
  httplib::Client client(url.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

  auto t0 = std::chrono::steady_clock::now();
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (latency_ms)
    *latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!res) throw TransientError("request to " + config.endpoint + " failed: " + httplib::to_string(res.error()));

  const int status = res->status;
  if (status >= 200 && status < 300) {
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      fail(ErrorCode::kProviderRejection, "unparseable response body from " + config.endpoint);
    }
  }
  std::string message = res->body;
  try {
    json err = json::parse(res->body);
    if (err.contains("error") && err["error"].is_object() && err["error"].contains("message"))
      message = err["error"]["message"].get<std::string>();
  } catch (const json::exception&) {
  }
  const std::string what = "HTTP " + std::to_string(status) + " from " + config.endpoint + ": " + message;
  if (status == 401 || status == 403) fail(ErrorCode::kAuthFailure, what);
  if (status == 408 || status == 429 || status >= 500) throw TransientError(what);
  fail(ErrorCode::kProviderRejection, what);
}

}  // namespace

RemoteChatBackend::RemoteChatBackend(RemoteConfig config) : config_(std::move(config)) {
  split_url(config_.endpoint);
}

ChatResponse RemoteChatBackend::complete(const ChatRequest& request) {
  json body = {{"model", request.model_id.empty() ? config_.model_id : request.model_id},
               {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  ChatResponse r;
  json reply = post_json(config_, body, &r.provider_latency_ms);
  try {
    r.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    if (reply.contains("usage") && reply["usage"].contains("completion_tokens"))
      r.token_count = reply["usage"]["completion_tokens"].get<int>();
    else
      r.token_count = static_cast<int>(text::word_count(r.text));
  } catch (const json::exception& e) {
    fail(ErrorCode::kProviderRejection, std::string("unexpected chat response shape: ") + e.what());
  }
  return r;
}

RemoteEmbeddingBackend::RemoteEmbeddingBackend(RemoteConfig config) : config_(std::move(config)) {
  split_url(config_.endpoint);
}

EmbeddingVector RemoteEmbeddingBackend::embed(std::string_view input) {
  json body = {{"model", config_.model_id}, {"input", std::string(input)}};
  json reply = post_json(config_, body, nullptr);
  EmbeddingVector v;
  try {
    v.values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kProviderRejection, std::string("unexpected embedding response shape: ") + e.what());
  }
  if (v.values.empty()) fail(ErrorCode::kProviderRejection, "empty embedding returned");
  return v;
}

std::string require_credential(std::string_view env_name) {
  const char* value = std::getenv(std::string(env_name).c_str());
  if (value == nullptr || *value == '\0')
    fail(ErrorCode::kMissingCredentials,
         "environment variable " + std::string(env_name) + " is not set");
  return value;
}

// ---------------------------------------------------------------------------
// Rate limiting and concurrency

Clock steady_clock_seconds() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

Sleeper real_sleeper() {
  return [](std::chrono::microseconds d) { std::this_thread::sleep_for(d); };
}

TokenBucket::TokenBucket(double rate, double capacity, Clock clock, Sleeper sleeper)
    : rate_(rate), capacity_(capacity), tokens_(capacity), clock_(std::move(clock)),
      sleeper_(std::move(sleeper)) {
  if (!(rate > 0.0)) fail(ErrorCode::kInvalidArgument, "rate limit must be positive");
  if (!(capacity >= 1.0)) fail(ErrorCode::kInvalidArgument, "bucket capacity must be >= 1");
  last_ = clock_();
}

void TokenBucket::refill_locked(double now) {
  if (now > last_) {
    tokens_ = std::min(capacity_, tokens_ + (now - last_) * rate_);
    last_ = now;
  }
}

bool TokenBucket::try_acquire() {
  std::lock_guard lock(mu_);
  refill_locked(clock_());
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void TokenBucket::acquire() {
  for (;;) {
    double wait_s;
    {
      std::lock_guard lock(mu_);
      refill_locked(clock_());
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait_s = (1.0 - tokens_) / rate_;
    }
    sleeper_(std::chrono::microseconds(static_cast<long long>(std::ceil(wait_s * 1e6))));
  }
}

ConcurrencyGate::ConcurrencyGate(std::size_t limit) : limit_(limit) {
  if (limit == 0) fail(ErrorCode::kInvalidArgument, "parallelism must be >= 1");
}

void ConcurrencyGate::enter() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return active_ < limit_; });
  ++active_;
}

void ConcurrencyGate::leave() {
  {
    std::lock_guard lock(mu_);
    --active_;
  }
  cv_.notify_one();
}

std::chrono::microseconds backoff_delay(const RetryPolicy& policy, int retry, std::uint64_t salt) {
  const double base_us =
      std::chrono::duration<double, std::micro>(policy.base_delay).count() * std::ldexp(1.0, retry);
  const std::uint64_t r = mix64(policy.seed ^ mix64(salt + static_cast<std::uint64_t>(retry)));
  const double u = static_cast<double>(r >> 11) * 0x1.0p-53 * 2.0 - 1.0;  // [-1, 1)
  return std::chrono::microseconds(static_cast<long long>(base_us * (1.0 + policy.jitter * u)));
}

// ---------------------------------------------------------------------------
// Cache

namespace {

std::string utc_now_iso() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json key_json(const CacheKey& key) {
  return {{"provider_id", key.provider_id},
          {"model_id", key.model_id},
          {"parameter_digest", key.parameter_digest},
          {"prompt_digest", key.prompt_digest}};
}

std::string record_checksum(const CacheKey& key, const json& value) {
  return digest128(io::canonical(json{{"key", key_json(key)}, {"value", value}}));
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ResponseCache::record_path(const CacheKey& key) const {
  const std::string addr = key.address();
  return dir_ / addr.substr(0, 2) / (addr + ".json");
}

std::optional<json> ResponseCache::lookup(const CacheKey& key) {
  const auto path = record_path(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  json record;
  try {
    record = json::parse(io::read_file(path));
  } catch (const json::parse_error&) {
    fail(ErrorCode::kCacheCorrupt, "unparseable cache record " + path.string());
  }
  if (!record.is_object() || !record.contains("value") || !record.contains("checksum") ||
      !record["checksum"].is_string())
    fail(ErrorCode::kCacheCorrupt, "incomplete cache record " + path.string());
  json stored_key = {{"provider_id", record.value("provider_id", "")},
                     {"model_id", record.value("model_id", "")},
                     {"parameter_digest", record.value("parameter_digest", "")},
                     {"prompt_digest", record.value("prompt_digest", "")}};
  if (stored_key != key_json(key))
    fail(ErrorCode::kCacheCorrupt, "cache record " + path.string() + " belongs to another key");
  if (record["checksum"].get<std::string>() != record_checksum(key, record["value"]))
    fail(ErrorCode::kCacheCorrupt, "checksum mismatch in cache record " + path.string());
  return record["value"];
}

void ResponseCache::store(const CacheKey& key, const json& value) {
  json record = key_json(key);
  record["value"] = value;
  record["checksum"] = record_checksum(key, value);
  record["created_at"] = utc_now_iso();
  io::write_file_atomic(record_path(key), record.dump(2) + "\n");
}

json ResponseCache::cached(const CacheKey& key, const std::function<json()>& compute) {
  try {
    if (auto hit = lookup(key)) {
      hits_.fetch_add(1);
      return *hit;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kCacheCorrupt) throw;
    log::warn(std::string(e.what()) + "; recomputing");
    repaired_.fetch_add(1);
  }
  misses_.fetch_add(1);
  json value = compute();
  store(key, value);
  return value;
}

// ---------------------------------------------------------------------------
// Calls

namespace {

template <typename Fn>
auto with_retry(const CallPolicy& policy, bool remote, std::uint64_t salt, const std::string& what,
                Fn&& fn) -> decltype(fn()) {
  const int attempts = std::max(1, policy.retry.attempts);
  std::string last;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    try {
      if (remote && policy.limiter) policy.limiter->acquire();
      ConcurrencyGate::Scope scope(remote ? policy.gate : nullptr);
      return fn();
    } catch (const TransientError& e) {
      last = e.what();
      log::debug(what + ": attempt " + std::to_string(attempt + 1) + " failed: " + last);
    }
    if (attempt + 1 < attempts && policy.retry.sleeper)
      policy.retry.sleeper(backoff_delay(policy.retry, attempt, salt));
  }
  fail(ErrorCode::kTimeout,
       what + " failed after " + std::to_string(attempts) + " attempts: " + last);
}

}  // namespace

ChatResponse chat_complete(const ChatRequest& request, ChatBackend& backend,
                           const CallPolicy& policy) {
  if (request.prompt.empty()) fail(ErrorCode::kInvalidArgument, "chat prompt is empty");
  if (!(request.temperature >= 0.0)) fail(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  if (request.max_tokens < 1) fail(ErrorCode::kInvalidArgument, "max_tokens must be >= 1");

  auto compute = [&] {
    return with_retry(policy, backend.is_remote(), stable_hash(request.prompt),
                      "chat completion", [&] { return backend.complete(request); });
  };
  if (!policy.cache) return compute();

  bool computed = false;
  json value = policy.cache->cached(chat_cache_key(backend.provider_id(), request), [&] {
    computed = true;
    return to_json(compute());
  });
  ChatResponse r = chat_response_from_json(value);
  if (!computed) r.provider_latency_ms = 0.0;
  return r;
}

EmbeddingVector embed_text(std::string_view input, EmbeddingBackend& backend,
                           const CallPolicy& policy) {
  if (text::trim(input).empty()) fail(ErrorCode::kEmptyInput, "cannot embed empty text");
  auto compute = [&] {
    return with_retry(policy, backend.is_remote(), stable_hash(input), "embedding",
                      [&] { return backend.embed(input); });
  };
  if (!policy.cache) return compute();
  json value = policy.cache->cached(
      embedding_cache_key(backend.provider_id(), backend.model_id(), input),
      [&] { return to_json(compute()); });
  return embedding_from_json(value);
}

}  // namespace turnpilot::providers
