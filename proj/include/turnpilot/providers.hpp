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

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace turnpilot::providers {

// The question goes out verbatim as the only user message; no system preamble.
struct ChatRequest {
  std::string prompt;
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 256;
};

struct ChatResponse {
  std::string text;
  int token_count = 0;
  double provider_latency_ms = 0.0;  // 0 for cache hits

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

struct EmbeddingVector {
  std::vector<double> values;
  bool normalized = false;

  std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

struct CacheKey {
  std::string provider_id;
  std::string model_id;
  std::string parameter_digest;
  std::string prompt_digest;

  // Content address of the record: digest over all four fields.
  std::string address() const;
  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

CacheKey chat_cache_key(std::string_view provider_id, const ChatRequest& request);
CacheKey embedding_cache_key(std::string_view provider_id, std::string_view model_id,
                             std::string_view text);

nlohmann::json to_json(const ChatResponse& r);
ChatResponse chat_response_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EmbeddingVector& v);
EmbeddingVector embedding_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Backends

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string provider_id() const = 0;
  // Remote backends pass through the rate limiter and concurrency gate.
  virtual bool is_remote() const { return false; }
  // Throws TransientError for retryable failures, Error otherwise.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string provider_id() const = 0;
  virtual std::string model_id() const = 0;
  virtual bool is_remote() const { return false; }
  virtual EmbeddingVector embed(std::string_view text) = 0;
};

// Canned prompt -> answer map. Unknown prompts are rejected, or answered with
// a deterministic echo when `echo_unknown` is set.
class MockChatBackend final : public ChatBackend {
 public:
  explicit MockChatBackend(std::map<std::string, std::string> canned = {},
                           bool echo_unknown = false);

  // Recorded responses: JSONL lines {prompt, text}.
  static MockChatBackend from_recording(const std::filesystem::path& path,
                                        bool echo_unknown = false);

  std::string provider_id() const override { return "mock"; }
  ChatResponse complete(const ChatRequest& request) override;

  std::size_t invocations() const noexcept { return invocations_.load(); }

 private:
  std::map<std::string, std::string> canned_;
  bool echo_unknown_;
  std::atomic<std::size_t> invocations_{0};
};

// Offline embedder: case-fold, split on non-alphanumeric runs, count tokens
// into hashed bins, L2-normalize.
class HashedBagEmbedder final : public EmbeddingBackend {
 public:
  static constexpr std::size_t kDim = 256;

  std::string provider_id() const override { return "deterministic"; }
  std::string model_id() const override { return "hashed-bag-256"; }
  EmbeddingVector embed(std::string_view text) override;

  static std::size_t bin_of(std::string_view token) noexcept;
};

struct RemoteConfig {
  std::string endpoint;  // full URL, http:// or https://
  std::string model_id;
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
};

// OpenAI-compatible chat-completions endpoint.
class RemoteChatBackend final : public ChatBackend {
 public:
  explicit RemoteChatBackend(RemoteConfig config);
  std::string provider_id() const override { return "remote-chat"; }
  bool is_remote() const override { return true; }
  ChatResponse complete(const ChatRequest& request) override;

 private:
  RemoteConfig config_;
};

// OpenAI-compatible embeddings endpoint.
class RemoteEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit RemoteEmbeddingBackend(RemoteConfig config);
  std::string provider_id() const override { return "remote-embed"; }
  std::string model_id() const override { return config_.model_id; }
  bool is_remote() const override { return true; }
  EmbeddingVector embed(std::string_view text) override;

 private:
  RemoteConfig config_;
};

inline constexpr std::string_view kDefaultEmbeddingModel =
    "sentence-transformers/all-mpnet-base-v2";
inline constexpr std::string_view kChatKeyEnv = "TURNPILOT_CHAT_KEY";
inline constexpr std::string_view kEmbedKeyEnv = "TURNPILOT_EMBED_KEY";

// Reads `env_name`; throws kMissingCredentials naming the variable if unset.
std::string require_credential(std::string_view env_name);

// ---------------------------------------------------------------------------
// Call machinery

using Clock = std::function<double()>;  // seconds
using Sleeper = std::function<void(std::chrono::microseconds)>;

Clock steady_clock_seconds();
Sleeper real_sleeper();

// Token bucket: `capacity` permits, refilled at `rate` permits per second.
class TokenBucket {
 public:
  TokenBucket(double rate, double capacity, Clock clock = steady_clock_seconds(),
              Sleeper sleeper = real_sleeper());

  bool try_acquire();
  void acquire();

  double rate() const noexcept { return rate_; }
  double capacity() const noexcept { return capacity_; }

 private:
  void refill_locked(double now);

  double rate_;
  double capacity_;
  double tokens_;
  double last_;
  Clock clock_;
  Sleeper sleeper_;
  std::mutex mu_;
};

// At most `limit` holders at once.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(std::size_t limit);
  void enter();
  void leave();
  std::size_t limit() const noexcept { return limit_; }

  class Scope {
   public:
    explicit Scope(ConcurrencyGate* gate) : gate_(gate) {
      if (gate_) gate_->enter();
    }
    ~Scope() {
      if (gate_) gate_->leave();
    }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    ConcurrencyGate* gate_;
  };

 private:
  std::size_t limit_;
  std::size_t active_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

// 3 attempts with 1s/2s/4s backoff and +/-20% jitter by default.
struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{1000};
  double jitter = 0.2;
  std::uint64_t seed = 0x5eed;
  Sleeper sleeper = real_sleeper();
};

// Delay before retry number `retry` (0-based), jitter drawn from `seed`.
std::chrono::microseconds backoff_delay(const RetryPolicy& policy, int retry,
                                        std::uint64_t salt);

// Content-addressed store: one JSON record per key under
// <dir>/<aa>/<address>.json holding {key fields, value, checksum, created_at}.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  // Hit: stored value, compute not called. Miss or corrupt record: compute,
  // store atomically, return.
  nlohmann::json cached(const CacheKey& key, const std::function<nlohmann::json()>& compute);

  std::optional<nlohmann::json> lookup(const CacheKey& key);
  void store(const CacheKey& key, const nlohmann::json& value);

  std::filesystem::path record_path(const CacheKey& key) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }
  std::size_t repaired() const noexcept { return repaired_.load(); }

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> repaired_{0};
};

struct CallPolicy {
  RetryPolicy retry;
  ResponseCache* cache = nullptr;
  TokenBucket* limiter = nullptr;
  ConcurrencyGate* gate = nullptr;
};

ChatResponse chat_complete(const ChatRequest& request, ChatBackend& backend,
                           const CallPolicy& policy = {});

// Throws kEmptyInput when `text` is blank.
EmbeddingVector embed_text(std::string_view text, EmbeddingBackend& backend,
                           const CallPolicy& policy = {});

}  // namespace turnpilot::providers
