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

#include "turnpilot/turnpilot.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "turnpilot/completeness.hpp"
#include "turnpilot/error.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/kv_config.hpp"
#include "turnpilot/log.hpp"
#include "turnpilot/pipeline.hpp"
#include "turnpilot/providers.hpp"
#include "turnpilot/report.hpp"
#include "turnpilot/turnsim.hpp"

using nlohmann::json;
namespace tp = turnpilot;
namespace fs = std::filesystem;

struct tp_chat {
  std::unique_ptr<tp::providers::ChatBackend> backend;
  tp::providers::MockChatBackend* mock = nullptr;
};
struct tp_embedder {
  std::unique_ptr<tp::providers::EmbeddingBackend> backend;
};
struct tp_model {
  tp::completeness::CompletenessModel model;
};
struct tp_profile {
  tp::turnsim::LatencyProfile profile;
};

namespace {

thread_local std::string g_last_error;

template <class F>
tp_status guarded(F&& f) noexcept {
  try {
    f();
    g_last_error.clear();
    return TP_OK;
  } catch (const tp::Error& e) {
    g_last_error = e.what();
    return static_cast<tp_status>(e.code());
  } catch (const tp::kv::ParseError& e) {
    g_last_error = e.what();
    return TP_E_CONFIG;
  } catch (const json::exception& e) {
    g_last_error = std::string("bad JSON: ") + e.what();
    return TP_E_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TP_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TP_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return TP_E_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) tp::fail(tp::ErrorCode::kInvalidArgument, what);
}

json parse_options(const char* options) {
  if (options == nullptr || *options == '\0') return json::object();
  json j = json::parse(options);
  require(j.is_object(), "options must be a JSON object");
  return j;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void put(char** out, const json& j) {
  if (out) *out = dup(j.dump(2));
}

tp::providers::RemoteConfig remote_config(const json& o, std::string_view default_key_env,
                                          std::string default_model) {
  tp::providers::RemoteConfig c;
  c.endpoint = o.value("endpoint", std::string());
  require(!c.endpoint.empty(), "remote provider needs an endpoint");
  c.model_id = o.value("model", std::move(default_model));
  c.timeout = std::chrono::milliseconds(o.value("timeout_ms", 30000));
  c.api_key = tp::providers::require_credential(o.value("key_env", std::string(default_key_env)));
  return c;
}

// Owns the cache, limiter and gate one stage call needs.
struct CallResources {
  std::optional<tp::providers::ResponseCache> cache;
  std::optional<tp::providers::TokenBucket> limiter;
  std::optional<tp::providers::ConcurrencyGate> gate;
  tp::providers::CallPolicy policy;

  explicit CallResources(const json& o) {
    if (auto dir = o.value("cache_dir", std::string()); !dir.empty()) {
      cache.emplace(dir);
      policy.cache = &*cache;
    }
    const double rate = o.value("rate_limit", 0.0);
    if (rate > 0.0) {
      limiter.emplace(rate, std::max(1.0, o.value("burst", 1.0)));
      policy.limiter = &*limiter;
    }
    const int parallelism = o.value("parallelism", 1);
    require(parallelism >= 1, "parallelism must be >= 1");
    gate.emplace(static_cast<std::size_t>(parallelism));
    policy.gate = &*gate;
    policy.retry.attempts = o.value("attempts", 3);
    require(policy.retry.attempts >= 1, "attempts must be >= 1");
    policy.retry.base_delay = std::chrono::milliseconds(o.value("retry_base_ms", 1000));
    policy.retry.seed = o.value("seed", policy.retry.seed);
  }

  json summary() const {
    if (!cache) return nullptr;
    return {{"hits", cache->hits()}, {"misses", cache->misses()}, {"repaired", cache->repaired()}};
  }
};

tp::pipeline::RunPaths run_paths(const char* run_dir) {
  require(run_dir && *run_dir, "run directory is required");
  return tp::pipeline::RunPaths{run_dir};
}

}  // namespace

extern "C" {

void tp_free(void* p) { std::free(p); }

const char* tp_last_error(void) { return g_last_error.c_str(); }

const char* tp_status_name(tp_status status) {
  static thread_local std::string name;
  name = std::string(tp::error_code_name(static_cast<tp::ErrorCode>(status)));
  return name.c_str();
}

const char* tp_version(void) {
  static const std::string id = tp::pipeline::build_id();
  return id.c_str();
}

void tp_set_log_level(int level) {
  if (level < 0) level = 0;
  if (level > 3) level = 3;
  tp::log::set_min_level(static_cast<tp::log::Level>(level));
}

tp_status tp_ingest(const char* run_dir, const char* nq_path, const char* options, char** out) {
  return guarded([&] {
    require(nq_path && *nq_path, "corpus path is required");
    const json o = parse_options(options);
    tp::pipeline::IngestOptions opts;
    opts.load.limit = o.value("limit", opts.load.limit);
    opts.load.filter_before_limit = o.value("filter_before_limit", false);
    const auto m = tp::pipeline::ingest(run_paths(run_dir), nq_path, opts);
    put(out, {{"loaded", m.loaded},
              {"dropped_negative_controls", m.dropped_negative_controls},
              {"records_scanned", m.records_scanned},
              {"requested_limit", m.requested_limit}});
  });
}

tp_status tp_truncate(const char* run_dir, const char* options, char** out) {
  return guarded([&] {
    const json o = parse_options(options);
    const std::vector<int> levels = o.value("levels", std::vector<int>{0, 1, 2, 3});
    const auto run = run_paths(run_dir);
    const auto variants = tp::pipeline::truncate(run, levels);
    const auto manifest = tp::corpus::read_manifest(run.corpus_manifest());
    put(out, {{"variants", variants.size()}, {"skipped_too_short", manifest.skipped_too_short.size()}});
  });
}

tp_status tp_chat_mock(const char* recording_path, int echo_unknown, tp_chat** out) {
  return guarded([&] {
    require(out != nullptr, "out handle is required");
    auto h = std::make_unique<tp_chat>();
    std::unique_ptr<tp::providers::MockChatBackend> mock;
    if (recording_path && *recording_path)
      mock.reset(new tp::providers::MockChatBackend(
          tp::providers::MockChatBackend::from_recording(recording_path, echo_unknown != 0)));
    else
      mock = std::make_unique<tp::providers::MockChatBackend>(std::map<std::string, std::string>{},
                                                              echo_unknown != 0);
    h->mock = mock.get();
    h->backend = std::move(mock);
    *out = h.release();
  });
}

tp_status tp_chat_remote(const char* options, tp_chat** out) {
  return guarded([&] {
    require(out != nullptr, "out handle is required");
    const json o = parse_options(options);
    auto h = std::make_unique<tp_chat>();
    h->backend = std::make_unique<tp::providers::RemoteChatBackend>(
        remote_config(o, tp::providers::kChatKeyEnv, "gpt-4"));
    *out = h.release();
  });
}

size_t tp_chat_invocations(const tp_chat* chat) { return chat && chat->mock ? chat->mock->invocations() : 0; }

void tp_chat_destroy(tp_chat* chat) { delete chat; }

tp_status tp_embedder_deterministic(tp_embedder** out) {
  return guarded([&] {
    require(out != nullptr, "out handle is required");
    auto h = std::make_unique<tp_embedder>();
    h->backend = std::make_unique<tp::providers::HashedBagEmbedder>();
    *out = h.release();
  });
}

tp_status tp_embedder_remote(const char* options, tp_embedder** out) {
  return guarded([&] {
    require(out != nullptr, "out handle is required");
    const json o = parse_options(options);
    auto h = std::make_unique<tp_embedder>();
    h->backend = std::make_unique<tp::providers::RemoteEmbeddingBackend>(remote_config(
        o, tp::providers::kEmbedKeyEnv, std::string(tp::providers::kDefaultEmbeddingModel)));
    *out = h.release();
  });
}

void tp_embedder_destroy(tp_embedder* embedder) { delete embedder; }

tp_status tp_generate(const char* run_dir, tp_chat* chat, const char* options, char** out) {
  return guarded([&] {
    require(chat != nullptr, "chat handle is required");
    const json o = parse_options(options);
    CallResources res(o);
    tp::experiment::GenerateOptions opts;
    opts.model_id = o.value("model", opts.model_id);
    opts.temperature = o.value("temperature", opts.temperature);
    opts.max_tokens = o.value("max_tokens", opts.max_tokens);
    opts.parallelism = o.value("parallelism", std::size_t{1});
    opts.failure_ceiling = o.value("failure_ceiling", opts.failure_ceiling);
    require(opts.temperature >= 0.0, "temperature must be >= 0");
    require(opts.max_tokens >= 1, "max_tokens must be >= 1");
    opts.policy = res.policy;
    const auto r = tp::pipeline::generate(run_paths(run_dir), *chat->backend, opts);
    put(out, {{"records", r.records.size()},
              {"failures", r.failures.size()},
              {"generated", r.generated},
              {"reused", r.reused},
              {"cache", res.summary()}});
  });
}

tp_status tp_score(const char* run_dir, tp_embedder* embedder, const char* options, char** out) {
  return guarded([&] {
    require(embedder != nullptr, "embedder handle is required");
    const json o = parse_options(options);
    CallResources res(o);
    tp::pipeline::ScoreOptions opts;
    opts.gold_percentile = o.value("gold_percentile", opts.gold_percentile);
    opts.inclusive = o.value("inclusive", false);
    opts.score_all = o.value("score_all", false);
    opts.policy = res.policy;
    const auto scores = tp::pipeline::score(run_paths(run_dir), *embedder->backend, opts);
    put(out, {{"scores", scores.size()}, {"cache", res.summary()}});
  });
}

tp_status tp_analyze(const char* run_dir, const char* options, char** out) {
  return guarded([&] {
    const json o = parse_options(options);
    tp::pipeline::AnalyzeOptions opts;
    opts.gold_percentile = o.value("gold_percentile", opts.gold_percentile);
    opts.inclusive = o.value("inclusive", false);
    opts.score_all = o.value("score_all", false);
    if (o.contains("theta") && !o["theta"].is_null()) opts.theta = o["theta"].get<double>();
    opts.histogram_bins = o.value("bins", opts.histogram_bins);
    if (opts.theta) require(*opts.theta >= -1.0 && *opts.theta <= 1.0, "theta must lie in [-1, 1]");
    require(opts.gold_percentile > 0 && opts.gold_percentile < 100, "gold percentile must lie in (0, 100)");
    put(out, tp::pipeline::analyze(run_paths(run_dir), opts));
  });
}

tp_status tp_run_digest(const char* run_dir, char** out) {
  return guarded([&] {
    const std::string d = tp::pipeline::run_digest(run_paths(run_dir));
    if (out) *out = dup(d);
  });
}

tp_status tp_report(const char* run_dir, const char* format, int bins, char** out) {
  return guarded([&] {
    require(format != nullptr, "format is required");
    const auto paths = tp::report::emit_report(run_paths(run_dir), tp::report::format_from_string(format),
                                               bins > 0 ? bins : 20);
    json list = json::array();
    for (const auto& p : paths) list.push_back(p.string());
    put(out, list);
  });
}

tp_status tp_train(const char* run_dir, const char* options, char** out) {
  return guarded([&] {
    const json o = parse_options(options);
    tp::pipeline::TrainOptions opts;
    auto& c = opts.config;
    c.learning_rate = o.value("learning_rate", c.learning_rate);
    c.l2 = o.value("l2", c.l2);
    c.epochs = o.value("epochs", c.epochs);
    c.batch_size = o.value("batch_size", c.batch_size);
    c.seed = o.value("seed", c.seed);
    c.split = o.value("split", c.split);
    opts.include_full = o.value("include_full", true);
    opts.model_path = o.value("model", std::string());
    opts.instances_path = o.value("instances", std::string());
    put(out, tp::pipeline::train(run_paths(run_dir), opts));
  });
}

tp_status tp_model_load(const char* path, tp_model** out) {
  return guarded([&] {
    require(path && *path && out, "model path and out handle are required");
    auto h = std::make_unique<tp_model>();
    h->model = tp::completeness::load_model(path);
    *out = h.release();
  });
}

void tp_model_destroy(tp_model* model) { delete model; }

tp_status tp_model_predict(const tp_model* model, const char* prefix, double* score) {
  return guarded([&] {
    require(model && prefix && score, "model, prefix and score are required");
    *score = tp::completeness::predict(model->model, prefix);
  });
}

tp_status tp_model_classify_incremental(const tp_model* model, const char* words, double cutoff, char** out) {
  return guarded([&] {
    require(model && words, "model and words are required");
    require(cutoff > 0.0 && cutoff < 1.0, "cutoff must lie in (0, 1)");
    const auto list = json::parse(words).get<std::vector<std::string>>();
    const auto r = tp::completeness::classify_incremental(model->model, list, cutoff);
    put(out, {{"scores", r.scores}, {"fired_at", r.fired_at ? json(*r.fired_at) : json(nullptr)}});
  });
}

tp_status tp_profile_builtin(const char* name, tp_profile** out) {
  return guarded([&] {
    require(name && out, "name and out handle are required");
    *out = new tp_profile{tp::turnsim::builtin_profile(name)};
  });
}

tp_status tp_profile_load(const char* path, tp_profile** out) {
  return guarded([&] {
    require(path && out, "path and out handle are required");
    *out = new tp_profile{tp::turnsim::load_profile(path)};
  });
}

tp_status tp_profile_parse(const char* text, const char* origin, tp_profile** out) {
  return guarded([&] {
    require(text && out, "text and out handle are required");
    *out = new tp_profile{tp::turnsim::parse_profile(text, origin ? origin : "<profile>")};
  });
}

tp_status tp_profile_set_jitter(tp_profile* profile, const char* options) {
  return guarded([&] {
    require(profile != nullptr, "profile handle is required");
    const json o = parse_options(options);
    auto p = profile->profile;
    p.jitter.enabled = o.value("enabled", p.jitter.enabled);
    p.jitter.sigma = o.value("sigma", p.jitter.sigma);
    p.jitter.seed = o.value("seed", p.jitter.seed);
    tp::turnsim::validate(p);
    profile->profile = p;
  });
}

tp_status tp_profile_format(const tp_profile* profile, char** out) {
  return guarded([&] {
    require(profile && out, "profile and out are required");
    *out = dup(tp::turnsim::format_profile(profile->profile));
  });
}

void tp_profile_destroy(tp_profile* profile) { delete profile; }

tp_status tp_profile_names(char** out) {
  return guarded([&] {
    require(out != nullptr, "out is required");
    std::string s;
    for (const auto& n : tp::turnsim::builtin_profile_names()) s += n + "\n";
    *out = dup(s);
  });
}

tp_status tp_simulate(const char* run_dir, const tp_profile* profile, const tp_model* model, const char* options,
                      char** out) {
  return guarded([&] {
    require(profile != nullptr, "profile handle is required");
    const json o = parse_options(options);
    const std::string name = o.value("policy", std::string("serial"));
    std::optional<tp::turnsim::FillerTemplates> templates;
    tp::turnsim::TurnPolicy policy;
    if (name == "serial") {
      policy = tp::turnsim::SerialPolicy{};
    } else if (name == "eager") {
      policy = tp::turnsim::EagerPolicy{o.value("k", 1)};
    } else if (name == "filler") {
      tp::turnsim::FillerPolicy f;
      f.model = model ? &model->model : nullptr;
      f.cutoff = o.value("cutoff", f.cutoff);
      f.filler_latency_ms = o.value("filler_latency_ms", f.filler_latency_ms);
      f.seed = o.value("seed", f.seed);
      require(f.cutoff > 0.0 && f.cutoff < 1.0, "cutoff must lie in (0, 1)");
      require(f.filler_latency_ms >= 0.0, "filler latency must be >= 0");
      if (auto path = o.value("templates", std::string()); !path.empty()) {
        templates = tp::turnsim::parse_filler_templates(tp::io::read_file(path));
        f.templates = &*templates;
      }
      policy = f;
    } else {
      tp::fail(tp::ErrorCode::kInvalidArgument, "unknown policy '" + name + "' (serial, eager, filler)");
    }
    tp::pipeline::SimulateOptions opts;
    opts.n_turns = o.value("n_turns", std::size_t{0});
    opts.tokens_from_responses = o.value("tokens_from_responses", false);
    const auto report = tp::pipeline::simulate(run_paths(run_dir), policy, profile->profile, opts);
    put(out, {{"report", tp::turnsim::to_json(report, o.value("include_turns", true))},
              {"csv", tp::turnsim::turns_csv(report)}});
  });
}

}  // extern "C"
