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

// turnpilot command-line driver. Talks to the library only through the C API.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "turnpilot/kv_config.hpp"
#include "turnpilot/turnpilot.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Bad flag values, unknown config keys and similar. Exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Library call failed. Exit code 1.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { kString, kInt, kReal, kBool };

struct Setting {
  Kind kind;
  std::string value;
  std::string source = "default";
};

// Every config key, its type and built-in default.
std::map<std::string, Setting> defaults() {
  return {
      {"run.dir", {Kind::kString, "runs/demo"}},
      {"corpus.path", {Kind::kString, ""}},
      {"corpus.limit", {Kind::kInt, "1000"}},
      {"corpus.filter_before_limit", {Kind::kBool, "false"}},
      {"corpus.levels", {Kind::kString, "0,1,2,3"}},
      {"chat.provider", {Kind::kString, "mock"}},
      {"chat.recording", {Kind::kString, ""}},
      {"chat.echo_unknown", {Kind::kBool, "false"}},
      {"chat.endpoint", {Kind::kString, "https://api.openai.com/v1/chat/completions"}},
      {"chat.model", {Kind::kString, "gpt-4"}},
      {"chat.key_env", {Kind::kString, "TURNPILOT_CHAT_KEY"}},
      {"chat.temperature", {Kind::kReal, "0"}},
      {"chat.max_tokens", {Kind::kInt, "256"}},
      {"chat.timeout_ms", {Kind::kInt, "30000"}},
      {"embed.provider", {Kind::kString, "deterministic"}},
      {"embed.endpoint", {Kind::kString, ""}},
      {"embed.model", {Kind::kString, "sentence-transformers/all-mpnet-base-v2"}},
      {"embed.key_env", {Kind::kString, "TURNPILOT_EMBED_KEY"}},
      {"embed.timeout_ms", {Kind::kInt, "30000"}},
      {"net.parallelism", {Kind::kInt, "4"}},
      {"net.rate_limit", {Kind::kReal, "0"}},
      {"net.burst", {Kind::kReal, "1"}},
      {"net.attempts", {Kind::kInt, "3"}},
      {"net.retry_base_ms", {Kind::kInt, "1000"}},
      {"net.failure_ceiling", {Kind::kReal, "0.02"}},
      {"net.seed", {Kind::kInt, "24301"}},
      {"cache.dir", {Kind::kString, ""}},
      {"analysis.gold_percentile", {Kind::kInt, "75"}},
      {"analysis.inclusive", {Kind::kBool, "false"}},
      {"analysis.score_all", {Kind::kBool, "false"}},
      {"analysis.theta", {Kind::kString, ""}},
      {"analysis.bins", {Kind::kInt, "20"}},
      {"train.learning_rate", {Kind::kReal, "0.1"}},
      {"train.l2", {Kind::kReal, "0.0001"}},
      {"train.epochs", {Kind::kInt, "20"}},
      {"train.batch_size", {Kind::kInt, "16"}},
      {"train.seed", {Kind::kInt, "42"}},
      {"train.split", {Kind::kReal, "0.8"}},
      {"train.include_full", {Kind::kBool, "true"}},
      {"train.model", {Kind::kString, ""}},
      {"classify.cutoff", {Kind::kReal, "0.8"}},
      {"sim.profile", {Kind::kString, "paper-groq"}},
      {"sim.policy", {Kind::kString, "serial"}},
      {"sim.k", {Kind::kInt, "2"}},
      {"sim.cutoff", {Kind::kReal, "0.8"}},
      {"sim.filler_latency_ms", {Kind::kReal, "100"}},
      {"sim.n_turns", {Kind::kInt, "0"}},
      {"sim.seed", {Kind::kInt, "0"}},
      {"sim.jitter", {Kind::kBool, "false"}},
      {"sim.jitter_sigma", {Kind::kReal, "0.1"}},
      {"sim.jitter_seed", {Kind::kInt, "1"}},
      {"sim.tokens_from_responses", {Kind::kBool, "false"}},
      {"sim.templates", {Kind::kString, ""}},
      {"report.format", {Kind::kString, "csv"}},
  };
}

std::string env_name(const std::string& key) {
  std::string out = "TURNPILOT_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

class Settings {
 public:
  Settings() : values_(defaults()) {}

  void load_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    std::vector<turnpilot::kv::Entry> entries;
    try {
      entries = turnpilot::kv::parse(buf.str(), path.string());
    } catch (const turnpilot::kv::ParseError& e) {
      throw UsageError(e.what());
    }
    for (const auto& e : entries) {
      const std::string where = path.string() + ":" + std::to_string(e.line);
      auto it = values_.find(e.key);
      if (it == values_.end()) throw UsageError(where + ": unknown key '" + e.key + "'");
      set(it->second, turnpilot::kv::to_string(e.value), where, e.key);
    }
  }

  void load_env() {
    for (auto& [key, s] : values_)
      if (const char* v = std::getenv(env_name(key).c_str())) set(s, v, "env " + env_name(key), key);
  }

  void apply_flag(const std::string& key, const std::string& value, const std::string& flag) {
    set(values_.at(key), value, flag, key);
  }

  const std::string& str(const std::string& key) const { return values_.at(key).value; }

  long long integer(const std::string& key) const {
    const auto& s = values_.at(key);
    return std::stoll(s.value);
  }
  double real(const std::string& key) const { return std::stod(values_.at(key).value); }
  bool boolean(const std::string& key) const { return values_.at(key).value == "true"; }

  const std::map<std::string, Setting>& all() const { return values_; }

 private:
  static void set(Setting& s, std::string value, const std::string& source, const std::string& key) {
    auto bad = [&](const char* what) {
      return UsageError(source + ": " + key + " must be " + what + ", got '" + value + "'");
    };
    switch (s.kind) {
      case Kind::kString:
        break;
      case Kind::kInt: {
        // Config numbers arrive as doubles; accept integral ones.
        char* end = nullptr;
        errno = 0;
        const double d = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0' || errno != 0 || d != static_cast<double>(static_cast<long long>(d)))
          throw bad("an integer");
        value = std::to_string(static_cast<long long>(d));
        break;
      }
      case Kind::kReal: {
        char* end = nullptr;
        errno = 0;
        std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0' || errno != 0) throw bad("a number");
        break;
      }
      case Kind::kBool:
        if (value == "1" || value == "yes" || value == "on") value = "true";
        if (value == "0" || value == "no" || value == "off") value = "false";
        if (value != "true" && value != "false") throw bad("true or false");
        break;
    }
    s.value = std::move(value);
    s.source = source;
  }

  std::map<std::string, Setting> values_;
};

// Flags declared per subcommand, bound to setting keys.
class Bindings {
 public:
  void option(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    storage_.emplace_back();
    bound_.push_back({app, app->add_option(name, storage_.back(), help), key, ""});
  }
  void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& value,
            const std::string& help) {
    storage_.emplace_back();
    bound_.push_back({app, app->add_flag(name, help), key, value});
  }

  void apply(const CLI::App* active, Settings& settings) const {
    auto it = storage_.begin();
    for (const auto& b : bound_) {
      const std::string& stored = *it++;
      if (b.app != active || b.option->count() == 0) continue;
      settings.apply_flag(b.key, b.fixed.empty() ? stored : b.fixed, b.option->get_name());
    }
  }

 private:
  struct Bound {
    const CLI::App* app;
    CLI::Option* option;
    std::string key;
    std::string fixed;  // value for flags
  };
  std::list<std::string> storage_;
  std::vector<Bound> bound_;
};

// ---------------------------------------------------------------------------
// C API helpers

struct Owned {
  char* p = nullptr;
  ~Owned() { tp_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

void check(tp_status status) {
  if (status != TP_OK)
    throw RuntimeFailure(std::string(tp_status_name(status)) + ": " + tp_last_error());
}

template <class T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() {
    if (p) Destroy(p);
  }
};
using ChatHandle = Handle<tp_chat, tp_chat_destroy>;
using EmbedderHandle = Handle<tp_embedder, tp_embedder_destroy>;
using ModelHandle = Handle<tp_model, tp_model_destroy>;
using ProfileHandle = Handle<tp_profile, tp_profile_destroy>;

void print_json(const std::string& text) { std::cout << text << "\n"; }

json net_options(const Settings& s) {
  json o = {{"parallelism", s.integer("net.parallelism")},
            {"rate_limit", s.real("net.rate_limit")},
            {"burst", s.real("net.burst")},
            {"attempts", s.integer("net.attempts")},
            {"retry_base_ms", s.integer("net.retry_base_ms")},
            {"seed", s.integer("net.seed")}};
  if (!s.str("cache.dir").empty()) o["cache_dir"] = s.str("cache.dir");
  return o;
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> levels;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0 || v > 3) throw std::invalid_argument(item);
      levels.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("levels must be a comma list drawn from 0,1,2,3, got '" + text + "'");
    }
  }
  if (levels.empty()) throw UsageError("levels must not be empty");
  return levels;
}

std::string run_dir(const Settings& s) { return s.str("run.dir"); }

// ---------------------------------------------------------------------------
// Subcommands

void cmd_ingest(const Settings& s) {
  if (s.str("corpus.path").empty()) throw UsageError("ingest needs --corpus (or corpus.path)");
  if (s.integer("corpus.limit") < 1) throw UsageError("corpus.limit must be >= 1");
  const json o = {{"limit", s.integer("corpus.limit")}, {"filter_before_limit", s.boolean("corpus.filter_before_limit")}};
  Owned out;
  check(tp_ingest(run_dir(s).c_str(), s.str("corpus.path").c_str(), o.dump().c_str(), &out.p));
  print_json(out.str());
}

void cmd_truncate(const Settings& s) {
  const json o = {{"levels", parse_levels(s.str("corpus.levels"))}};
  Owned out;
  check(tp_truncate(run_dir(s).c_str(), o.dump().c_str(), &out.p));
  print_json(out.str());
}

void cmd_generate(const Settings& s) {
  ChatHandle chat;
  const std::string provider = s.str("chat.provider");
  if (provider == "mock") {
    if (s.str("chat.recording").empty()) throw UsageError("the mock provider needs --recording (or chat.recording)");
    check(tp_chat_mock(s.str("chat.recording").c_str(), s.boolean("chat.echo_unknown") ? 1 : 0, &chat.p));
  } else if (provider == "remote") {
    const json o = {{"endpoint", s.str("chat.endpoint")},
                    {"model", s.str("chat.model")},
                    {"key_env", s.str("chat.key_env")},
                    {"timeout_ms", s.integer("chat.timeout_ms")}};
    check(tp_chat_remote(o.dump().c_str(), &chat.p));
  } else {
    throw UsageError("chat.provider must be mock or remote, got '" + provider + "'");
  }
  json o = net_options(s);
  o["model"] = s.str("chat.model");
  o["temperature"] = s.real("chat.temperature");
  o["max_tokens"] = s.integer("chat.max_tokens");
  o["failure_ceiling"] = s.real("net.failure_ceiling");
  Owned out;
  check(tp_generate(run_dir(s).c_str(), chat.p, o.dump().c_str(), &out.p));
  print_json(out.str());
}

void cmd_score(const Settings& s) {
  EmbedderHandle embedder;
  const std::string provider = s.str("embed.provider");
  if (provider == "deterministic") {
    check(tp_embedder_deterministic(&embedder.p));
  } else if (provider == "remote") {
    const json o = {{"endpoint", s.str("embed.endpoint")},
                    {"model", s.str("embed.model")},
                    {"key_env", s.str("embed.key_env")},
                    {"timeout_ms", s.integer("embed.timeout_ms")}};
    check(tp_embedder_remote(o.dump().c_str(), &embedder.p));
  } else {
    throw UsageError("embed.provider must be deterministic or remote, got '" + provider + "'");
  }
  json o = net_options(s);
  o["gold_percentile"] = s.integer("analysis.gold_percentile");
  o["inclusive"] = s.boolean("analysis.inclusive");
  o["score_all"] = s.boolean("analysis.score_all");
  Owned out;
  check(tp_score(run_dir(s).c_str(), embedder.p, o.dump().c_str(), &out.p));
  print_json(out.str());
}

void cmd_analyze(const Settings& s) {
  const auto pct = s.integer("analysis.gold_percentile");
  if (pct <= 0 || pct >= 100) throw UsageError("gold percentile must lie in (0, 100)");
  if (s.integer("analysis.bins") < 1) throw UsageError("bins must be >= 1");
  json o = {{"gold_percentile", pct},
            {"inclusive", s.boolean("analysis.inclusive")},
            {"score_all", s.boolean("analysis.score_all")},
            {"bins", s.integer("analysis.bins")}};
  if (const auto& theta = s.str("analysis.theta"); !theta.empty()) {
    char* end = nullptr;
    const double v = std::strtod(theta.c_str(), &end);
    if (*end != '\0' || v < -1.0 || v > 1.0) throw UsageError("theta must be a number in [-1, 1]");
    o["theta"] = v;
  }
  Owned out;
  check(tp_analyze(run_dir(s).c_str(), o.dump().c_str(), &out.p));
  const json stats = json::parse(out.str());
  json brief = {{"ref_vs_res0", stats["ref_vs_res0"]},
                {"gold", stats["gold"]},
                {"theta", stats["theta"]},
                {"retained", stats["retained"]}};
  brief["ref_vs_res0"].erase("box");
  print_json(brief.dump(2));
}

std::string model_path(const Settings& s) {
  if (!s.str("train.model").empty()) return s.str("train.model");
  return (fs::path(run_dir(s)) / "model.json").string();
}

void cmd_train(const Settings& s) {
  const json o = {{"learning_rate", s.real("train.learning_rate")},
                  {"l2", s.real("train.l2")},
                  {"epochs", s.integer("train.epochs")},
                  {"batch_size", s.integer("train.batch_size")},
                  {"seed", s.integer("train.seed")},
                  {"split", s.real("train.split")},
                  {"include_full", s.boolean("train.include_full")},
                  {"model", model_path(s)}};
  Owned out;
  check(tp_train(run_dir(s).c_str(), o.dump().c_str(), &out.p));
  print_json(out.str());
}

void cmd_classify(const Settings& s, const std::vector<std::string>& words, bool stream) {
  const double cutoff = s.real("classify.cutoff");
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw UsageError("cutoff must lie in (0, 1)");
  ModelHandle model;
  check(tp_model_load(model_path(s).c_str(), &model.p));

  if (!stream) {
    if (words.empty()) throw UsageError("classify needs a prefix (or --stream)");
    std::string prefix;
    for (const auto& w : words) prefix += (prefix.empty() ? "" : " ") + w;
    double score = 0.0;
    check(tp_model_predict(model.p, prefix.c_str(), &score));
    std::printf("%.17g\t%s\n", score, score >= cutoff ? "complete" : "incomplete");
    return;
  }
  // One word per input line; a score per word as it arrives.
  std::string prefix, line;
  std::size_t index = 0;
  bool fired = false;
  while (std::getline(std::cin, line)) {
    std::istringstream tokens(line);
    std::string word;
    while (tokens >> word) {
      prefix += (prefix.empty() ? "" : " ") + word;
      double score = 0.0;
      check(tp_model_predict(model.p, prefix.c_str(), &score));
      ++index;
      const bool crossed = !fired && score >= cutoff;
      fired = fired || crossed;
      std::printf("%zu\t%s\t%.17g%s\n", index, word.c_str(), score, crossed ? "\tfire" : "");
      std::fflush(stdout);
    }
  }
}

void cmd_simulate(const Settings& s, const std::string& out_dir, bool print_profile) {
  ProfileHandle profile;
  const std::string& name = s.str("sim.profile");
  if (fs::is_regular_file(name)) check(tp_profile_load(name.c_str(), &profile.p));
  else check(tp_profile_builtin(name.c_str(), &profile.p));
  if (s.boolean("sim.jitter") || s.all().at("sim.jitter").source != "default") {
    const json j = {{"enabled", s.boolean("sim.jitter")},
                    {"sigma", s.real("sim.jitter_sigma")},
                    {"seed", s.integer("sim.jitter_seed")}};
    check(tp_profile_set_jitter(profile.p, j.dump().c_str()));
  }
  if (print_profile) {
    Owned text;
    check(tp_profile_format(profile.p, &text.p));
    std::cout << text.str();
    return;
  }

  const std::string policy = s.str("sim.policy");
  json o = {{"policy", policy},
            {"k", s.integer("sim.k")},
            {"cutoff", s.real("sim.cutoff")},
            {"filler_latency_ms", s.real("sim.filler_latency_ms")},
            {"seed", s.integer("sim.seed")},
            {"n_turns", s.integer("sim.n_turns")},
            {"tokens_from_responses", s.boolean("sim.tokens_from_responses")}};
  if (!s.str("sim.templates").empty()) o["templates"] = s.str("sim.templates");
  if (policy != "serial" && policy != "eager" && policy != "filler")
    throw UsageError("policy must be serial, eager or filler, got '" + policy + "'");
  if (policy == "eager" && (s.integer("sim.k") < 1 || s.integer("sim.k") > 3)) throw UsageError("k must be 1, 2 or 3");
  if (s.integer("sim.n_turns") < 0) throw UsageError("n_turns must be >= 0");

  ModelHandle model;
  if (policy == "filler") check(tp_model_load(model_path(s).c_str(), &model.p));

  Owned out;
  check(tp_simulate(run_dir(s).c_str(), profile.p, model.p, o.dump().c_str(), &out.p));
  json result = json::parse(out.str());

  const fs::path dir = out_dir.empty() ? fs::path(run_dir(s)) / "sim" : fs::path(out_dir);
  std::string tag = policy;
  if (policy == "eager") tag += std::to_string(s.integer("sim.k"));
  fs::create_directories(dir);
  const fs::path json_path = dir / ("report_" + tag + ".json");
  const fs::path csv_path = dir / ("turns_" + tag + ".csv");
  std::ofstream(json_path) << result["report"].dump(2) << "\n";
  std::ofstream(csv_path) << result["csv"].get<std::string>();
  if (!fs::exists(json_path) || !fs::exists(csv_path)) throw RuntimeFailure("cannot write into " + dir.string());

  json brief = result["report"];
  brief.erase("outcomes");
  brief["files"] = {json_path.string(), csv_path.string()};
  print_json(brief.dump(2));
}

void cmd_report(const Settings& s) {
  const std::string& format = s.str("report.format");
  if (format != "csv" && format != "json" && format != "svg")
    throw UsageError("format must be csv, json or svg, got '" + format + "'");
  if (s.integer("analysis.bins") < 1) throw UsageError("bins must be >= 1");
  Owned out;
  check(tp_report(run_dir(s).c_str(), format.c_str(), static_cast<int>(s.integer("analysis.bins")), &out.p));
  for (const auto& p : json::parse(out.str())) std::cout << p.get<std::string>() << "\n";
}

void cmd_digest(const Settings& s) {
  Owned out;
  check(tp_run_digest(run_dir(s).c_str(), &out.p));
  std::cout << out.str() << "\n";
}

void cmd_config(const Settings& s) {
  for (const auto& [key, v] : s.all())
    std::cout << key << " = " << (v.kind == Kind::kString ? "\"" + v.value + "\"" : v.value) << "  # " << v.source
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncation-robustness experiments, completeness classifier and turn-latency simulator.", "turnpilot"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tp_version()));

  std::string config_path;
  bool verbose = false, quiet = false;
  app.add_option("--config", config_path, "TOML-style config file")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only");
  app.fallthrough();

  Bindings b;
  auto add_run = [&](CLI::App* sub) { b.option(sub, "--run", "run.dir", "Run directory"); };
  auto add_net = [&](CLI::App* sub) {
    b.option(sub, "--parallelism", "net.parallelism", "Concurrent requests");
    b.option(sub, "--rate-limit", "net.rate_limit", "Remote requests per second (0 = unlimited)");
    b.option(sub, "--burst", "net.burst", "Rate limiter bucket capacity");
    b.option(sub, "--attempts", "net.attempts", "Attempts per request");
    b.option(sub, "--retry-base-ms", "net.retry_base_ms", "First backoff delay");
    b.option(sub, "--cache-dir", "cache.dir", "Response cache directory");
  };
  auto add_gold = [&](CLI::App* sub) {
    b.option(sub, "--gold-percentile", "analysis.gold_percentile", "Gold subset percentile");
    b.flag(sub, "--inclusive", "analysis.inclusive", "true", "Gold subset includes scores equal to the threshold");
    b.flag(sub, "--score-all", "analysis.score_all", "true", "Truncation scores for every example");
  };

  auto* ingest = app.add_subcommand("ingest", "Load NQ records into the run directory");
  add_run(ingest);
  b.option(ingest, "--corpus", "corpus.path", "Simplified NQ JSONL file");
  b.option(ingest, "--limit", "corpus.limit", "Records to take");
  b.flag(ingest, "--filter-before-limit", "corpus.filter_before_limit", "true",
         "Drop negative controls before applying the limit");

  auto* truncate = app.add_subcommand("truncate", "Build truncated question variants");
  add_run(truncate);
  b.option(truncate, "--levels", "corpus.levels", "Comma list of levels, e.g. 0,1,2,3");

  auto* generate = app.add_subcommand("generate", "Collect LLM responses for every variant (resumable)");
  add_run(generate);
  add_net(generate);
  b.option(generate, "--provider", "chat.provider", "mock or remote");
  b.option(generate, "--recording", "chat.recording", "Recorded responses for the mock provider");
  b.flag(generate, "--echo-unknown", "chat.echo_unknown", "true", "Mock answers unknown prompts with an echo");
  b.option(generate, "--endpoint", "chat.endpoint", "Chat completions URL");
  b.option(generate, "--model", "chat.model", "Model id");
  b.option(generate, "--temperature", "chat.temperature", "Sampling temperature");
  b.option(generate, "--max-tokens", "chat.max_tokens", "Response token limit");
  b.option(generate, "--failure-ceiling", "net.failure_ceiling", "Tolerated failure fraction");

  auto* score = app.add_subcommand("score", "SEMSCORE ref vs res-0 and res-0 vs res-k");
  add_run(score);
  add_net(score);
  add_gold(score);
  b.option(score, "--embedder", "embed.provider", "deterministic or remote");
  b.option(score, "--embed-endpoint", "embed.endpoint", "Embeddings URL");
  b.option(score, "--embed-model", "embed.model", "Embedding model id");

  auto* analyze = app.add_subcommand("analyze", "Gold subset, labels, retained counts and stats.json");
  add_run(analyze);
  add_gold(analyze);
  b.option(analyze, "--theta", "analysis.theta", "Label threshold (default: gold threshold)");
  b.option(analyze, "--bins", "analysis.bins", "Histogram bins");

  auto* train = app.add_subcommand("train", "Train the completeness classifier from labels");
  add_run(train);
  b.option(train, "--model", "train.model", "Model output path (default <run>/model.json)");
  b.option(train, "--learning-rate", "train.learning_rate", "SGD step size");
  b.option(train, "--l2", "train.l2", "L2 strength");
  b.option(train, "--epochs", "train.epochs", "Epochs");
  b.option(train, "--batch-size", "train.batch_size", "Mini-batch size");
  b.option(train, "--seed", "train.seed", "Shuffle and split seed");
  b.option(train, "--split", "train.split", "Train fraction");
  b.flag(train, "--include-full", "train.include_full", "true", "Add full questions as complete");
  b.flag(train, "--no-include-full", "train.include_full", "false", "Prefixes only");

  auto* classify = app.add_subcommand("classify", "Score a prefix, or a word stream on stdin with --stream");
  add_run(classify);
  std::vector<std::string> classify_words;
  bool stream = false;
  b.option(classify, "--model", "train.model", "Model path (default <run>/model.json)");
  b.option(classify, "--cutoff", "classify.cutoff", "Completeness cutoff");
  classify->add_flag("--stream", stream, "Read words line by line from stdin");
  classify->add_option("prefix", classify_words, "Prefix words");

  auto* simulate = app.add_subcommand("simulate", "Turn-latency simulation under a policy");
  add_run(simulate);
  std::string sim_out;
  bool print_profile = false;
  b.option(simulate, "--profile", "sim.profile", "Built-in profile name or profile file");
  b.option(simulate, "--policy", "sim.policy", "serial, eager or filler");
  b.option(simulate, "-k", "sim.k", "Words truncated under the eager policy");
  b.option(simulate, "--cutoff", "sim.cutoff", "Filler policy completeness cutoff");
  b.option(simulate, "--filler-latency-ms", "sim.filler_latency_ms", "Filler audio latency");
  b.option(simulate, "--n-turns", "sim.n_turns", "Turns to simulate (0 = all)");
  b.option(simulate, "--seed", "sim.seed", "Filler rotation seed");
  b.flag(simulate, "--jitter", "sim.jitter", "true", "Enable log-normal latency jitter");
  b.option(simulate, "--jitter-sigma", "sim.jitter_sigma", "Jitter sigma");
  b.option(simulate, "--jitter-seed", "sim.jitter_seed", "Jitter seed");
  b.flag(simulate, "--tokens-from-responses", "sim.tokens_from_responses", "true",
         "Use res-0 token counts instead of the worst case");
  b.option(simulate, "--templates", "sim.templates", "Filler template file");
  b.option(simulate, "--model", "train.model", "Classifier for the filler policy");
  simulate->add_option("--out", sim_out, "Output directory (default <run>/sim)");
  simulate->add_flag("--print-profile", print_profile, "Print the effective profile and exit");

  auto* report = app.add_subcommand("report", "Figure data as CSV, JSON or SVG");
  add_run(report);
  b.option(report, "--format", "report.format", "csv, json or svg");
  b.option(report, "--bins", "analysis.bins", "Histogram bins");

  auto* digest = app.add_subcommand("digest", "Print the run digest");
  add_run(digest);

  auto* config = app.add_subcommand("config", "Print effective settings and where each came from");
  add_run(config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  tp_set_log_level(verbose ? 0 : quiet ? 3 : 1);
  try {
    Settings settings;
    if (!config_path.empty()) settings.load_file(config_path);
    settings.load_env();
    const CLI::App* active = app.get_subcommands().front();
    b.apply(active, settings);

    if (active == ingest) cmd_ingest(settings);
    else if (active == truncate) cmd_truncate(settings);
    else if (active == generate) cmd_generate(settings);
    else if (active == score) cmd_score(settings);
    else if (active == analyze) cmd_analyze(settings);
    else if (active == train) cmd_train(settings);
    else if (active == classify) cmd_classify(settings, classify_words, stream);
    else if (active == simulate) cmd_simulate(settings, sim_out, print_profile);
    else if (active == report) cmd_report(settings);
    else if (active == digest) cmd_digest(settings);
    else if (active == config) cmd_config(settings);
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "turnpilot: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RuntimeFailure& e) {
    std::cerr << "turnpilot: error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "turnpilot: error: " << e.what() << "\n";
    return kExitFailure;
  }
}
