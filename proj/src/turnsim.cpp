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

#include "turnpilot/turnsim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "turnpilot/error.hpp"
#include "turnpilot/hash.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/kv_config.hpp"
#include "turnpilot/text.hpp"
#include "turnpilot_assets.hpp"

namespace turnpilot::turnsim {

using nlohmann::json;

std::string_view to_string(AsrMode m) noexcept {
  switch (m) {
    case AsrMode::kFinal: return "final";
    case AsrMode::kStable: return "stable";
    case AsrMode::kSlowFinal: return "slow_final";
  }
  return "?";
}

AsrMode asr_mode_from_string(std::string_view s) {
  for (AsrMode m : {AsrMode::kFinal, AsrMode::kStable, AsrMode::kSlowFinal})
    if (to_string(m) == s) return m;
  fail(ErrorCode::kConfig, "unknown asr_mode '" + std::string(s) + "' (final, stable, slow_final)");
}

double LatencyProfile::asr_ms() const noexcept {
  switch (asr_mode) {
    case AsrMode::kStable: return asr_stable_ms;
    case AsrMode::kSlowFinal: return asr_slow_final_ms;
    case AsrMode::kFinal: break;
  }
  return asr_final_ms;
}

void validate(const LatencyProfile& p) {
  auto nonneg = [&](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorCode::kConfig, std::string("profile '") + p.name + "': " + name + " must be >= 0");
  };
  nonneg(p.asr_first_hyp_ms, "asr_first_hyp_ms");
  nonneg(p.asr_stable_ms, "asr_stable_ms");
  nonneg(p.asr_final_ms, "asr_final_ms");
  nonneg(p.asr_slow_final_ms, "asr_slow_final_ms");
  nonneg(p.llm_initial_ms, "llm_initial_ms");
  nonneg(p.llm_per_token_ms, "llm_per_token_ms");
  if (p.llm_worst_case_ms) nonneg(*p.llm_worst_case_ms, "llm_worst_case_ms");
  nonneg(p.tts_first_audio_min_ms, "tts_first_audio_ms");
  nonneg(p.tts_first_audio_max_ms, "tts_first_audio_ms");
  nonneg(p.jitter.sigma, "jitter.sigma");
  if (p.tts_first_audio_min_ms > p.tts_first_audio_max_ms)
    fail(ErrorCode::kConfig, "profile '" + p.name + "': tts_first_audio_ms range is reversed");
  if (!(p.speaking_rate_syll_per_s > 0.0))
    fail(ErrorCode::kConfig, "profile '" + p.name + "': speaking_rate_syll_per_s must be > 0");
  if (p.default_response_tokens < 1)
    fail(ErrorCode::kConfig, "profile '" + p.name + "': default_response_tokens must be >= 1");
}

LatencyProfile builtin_profile(std::string_view name) {
  LatencyProfile p;
  p.name = std::string(name);
  if (name == "paper-groq") return p;
  if (name == "paper-slow") {
    p.llm_per_token_ms = 94.0;
    p.llm_worst_case_ms = 650.0;
    return p;
  }
  if (name == "paper-azure-asr") {
    p.asr_mode = AsrMode::kStable;
    return p;
  }
  fail(ErrorCode::kConfig, "unknown profile '" + std::string(name) + "'");
}

std::vector<std::string> builtin_profile_names() { return {"paper-groq", "paper-slow", "paper-azure-asr"}; }

LatencyProfile parse_profile(std::string_view body, std::string_view origin) {
  std::vector<kv::Entry> entries;
  try {
    entries = kv::parse(body, origin);
  } catch (const kv::ParseError& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  LatencyProfile p;
  for (const auto& e : entries)
    if (e.key == "base") {
      if (!e.value.is_string()) fail(ErrorCode::kConfig, std::string(origin) + ":" + std::to_string(e.line) + ": base must be a string");
      p = builtin_profile(std::get<std::string>(e.value.data));
    }

  for (const auto& e : entries) {
    const std::string where = std::string(origin) + ":" + std::to_string(e.line) + ": ";
    auto number = [&]() -> double {
      if (!e.value.is_number()) fail(ErrorCode::kConfig, where + e.key + " must be a number");
      return std::get<double>(e.value.data);
    };
    auto string = [&]() -> std::string {
      if (!e.value.is_string()) fail(ErrorCode::kConfig, where + e.key + " must be a string");
      return std::get<std::string>(e.value.data);
    };
    if (e.key == "base") continue;
    if (e.key == "name") p.name = string();
    else if (e.key == "asr_first_hyp_ms") p.asr_first_hyp_ms = number();
    else if (e.key == "asr_stable_ms") p.asr_stable_ms = number();
    else if (e.key == "asr_final_ms") p.asr_final_ms = number();
    else if (e.key == "asr_slow_final_ms") p.asr_slow_final_ms = number();
    else if (e.key == "asr_mode") {
      try {
        p.asr_mode = asr_mode_from_string(string());
      } catch (const Error& err) {
        fail(ErrorCode::kConfig, where + err.what());
      }
    } else if (e.key == "llm_initial_ms") p.llm_initial_ms = number();
    else if (e.key == "llm_per_token_ms") p.llm_per_token_ms = number();
    else if (e.key == "llm_worst_case_ms") {
      if (e.value.is_string() && std::get<std::string>(e.value.data) == "none") p.llm_worst_case_ms.reset();
      else p.llm_worst_case_ms = number();
    } else if (e.key == "tts_first_audio_ms") {
      if (e.value.is_number()) {
        p.tts_first_audio_min_ms = p.tts_first_audio_max_ms = number();
      } else if (e.value.is_array() && std::get<kv::Array>(e.value.data).size() == 2 &&
                 std::get<kv::Array>(e.value.data)[0].is_number() &&
                 std::get<kv::Array>(e.value.data)[1].is_number()) {
        const auto& a = std::get<kv::Array>(e.value.data);
        p.tts_first_audio_min_ms = std::get<double>(a[0].data);
        p.tts_first_audio_max_ms = std::get<double>(a[1].data);
      } else {
        fail(ErrorCode::kConfig, where + "tts_first_audio_ms must be a number or [min, max]");
      }
    } else if (e.key == "speaking_rate_syll_per_s") p.speaking_rate_syll_per_s = number();
    else if (e.key == "default_response_tokens") p.default_response_tokens = static_cast<int>(number());
    else if (e.key == "jitter.family") {
      const std::string family = string();
      if (family == "none") p.jitter.enabled = false;
      else if (family == "lognormal") p.jitter.enabled = true;
      else fail(ErrorCode::kConfig, where + "jitter.family must be \"lognormal\" or \"none\"");
    } else if (e.key == "jitter.enabled") {
      if (!e.value.is_bool()) fail(ErrorCode::kConfig, where + "jitter.enabled must be true or false");
      p.jitter.enabled = std::get<bool>(e.value.data);
    } else if (e.key == "jitter.sigma") p.jitter.sigma = number();
    else if (e.key == "jitter.seed") p.jitter.seed = static_cast<std::uint64_t>(number());
    else fail(ErrorCode::kConfig, where + "unknown key '" + e.key + "'");
  }
  validate(p);
  return p;
}

LatencyProfile load_profile(const std::filesystem::path& path) {
  return parse_profile(io::read_file(path), path.string());
}

std::string format_profile(const LatencyProfile& p) {
  std::ostringstream out;
  out.precision(17);
  out << "name = \"" << p.name << "\"\n"
      << "asr_first_hyp_ms = " << p.asr_first_hyp_ms << "\n"
      << "asr_stable_ms = " << p.asr_stable_ms << "\n"
      << "asr_final_ms = " << p.asr_final_ms << "\n"
      << "asr_slow_final_ms = " << p.asr_slow_final_ms << "\n"
      << "asr_mode = \"" << to_string(p.asr_mode) << "\"\n"
      << "llm_initial_ms = " << p.llm_initial_ms << "\n"
      << "llm_per_token_ms = " << p.llm_per_token_ms << "\n";
  if (p.llm_worst_case_ms) out << "llm_worst_case_ms = " << *p.llm_worst_case_ms << "\n";
  else out << "llm_worst_case_ms = \"none\"\n";
  out << "tts_first_audio_ms = [" << p.tts_first_audio_min_ms << ", " << p.tts_first_audio_max_ms << "]\n"
      << "speaking_rate_syll_per_s = " << p.speaking_rate_syll_per_s << "\n"
      << "default_response_tokens = " << p.default_response_tokens << "\n"
      << "\n[jitter]\n"
      << "family = \"" << (p.jitter.enabled ? "lognormal" : "none") << "\"\n"
      << "sigma = " << p.jitter.sigma << "\n"
      << "seed = " << p.jitter.seed << "\n";
  return out.str();
}

std::string policy_name(const TurnPolicy& policy) {
  if (std::holds_alternative<SerialPolicy>(policy)) return "serial";
  if (const auto* e = std::get_if<EagerPolicy>(&policy)) return "eager:" + std::to_string(e->k);
  return "filler";
}

int estimate_syllables(std::string_view input) {
  int total = 0;
  for (auto word : text::split_words(input)) {
    int groups = 0;
    bool in_vowel = false, has_letter = false;
    for (char raw : word) {
      const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
      if (c >= 'a' && c <= 'z') has_letter = true;
      const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
      if (vowel && !in_vowel) ++groups;
      in_vowel = vowel;
    }
    if (groups == 0 && has_letter) groups = 1;
    total += groups;
  }
  return total;
}

double utterance_duration_ms(std::string_view question, const LatencyProfile& profile) {
  if (text::trim(question).empty()) fail(ErrorCode::kEmptyInput, "question is empty");
  return static_cast<double>(estimate_syllables(question)) / profile.speaking_rate_syll_per_s * 1000.0;
}

namespace {

// Uniform in (0, 1) from a counter-based stream.
double unit_uniform(std::uint64_t key) {
  return (static_cast<double>(mix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(std::uint64_t key) {
  const double u1 = unit_uniform(key * 2 + 1);
  const double u2 = unit_uniform(key * 2 + 2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double tail_duration_ms(const std::vector<std::string_view>& words, std::size_t keep,
                        const LatencyProfile& profile) {
  int syllables = 0;
  for (std::size_t i = keep; i < words.size(); ++i) syllables += estimate_syllables(words[i]);
  return static_cast<double>(syllables) / profile.speaking_rate_syll_per_s * 1000.0;
}

std::optional<experiment::Label> label_at(const TurnInput& in, int level) {
  if (auto it = in.labels.find(level); it != in.labels.end()) return it->second;
  return std::nullopt;
}

}  // namespace

PipelineLatency pipeline_latency(const LatencyProfile& profile, int response_tokens, std::uint64_t turn_index) {
  if (response_tokens < 1) fail(ErrorCode::kInvalidArgument, "response_tokens must be >= 1");
  PipelineLatency l;
  l.asr_ms = profile.asr_ms();
  l.llm_ms = profile.llm_initial_ms + response_tokens * profile.llm_per_token_ms;
  if (profile.llm_worst_case_ms) l.llm_ms = std::min(l.llm_ms, *profile.llm_worst_case_ms);
  l.tts_ms = profile.tts_first_audio_max_ms;
  if (profile.jitter.enabled) {
    const std::uint64_t base = mix64(profile.jitter.seed ^ mix64(turn_index + 0x9e3779b97f4a7c15ULL)) * 8;
    const double span = profile.tts_first_audio_max_ms - profile.tts_first_audio_min_ms;
    l.tts_ms = profile.tts_first_audio_min_ms + span * unit_uniform(base + 7);
    l.asr_ms *= std::exp(profile.jitter.sigma * standard_normal(base + 0));
    l.llm_ms *= std::exp(profile.jitter.sigma * standard_normal(base + 2));
    l.tts_ms *= std::exp(profile.jitter.sigma * standard_normal(base + 4));
  }
  return l;
}

TurnOutcome simulate_turn(const TurnInput& input, const TurnPolicy& policy, const LatencyProfile& profile) {
  TurnOutcome out;
  out.example_id = input.example_id;
  out.policy = policy_name(policy);
  const double serial = pipeline_latency(profile, input.response_tokens, input.turn_index).total();
  const auto words = text::split_words(input.question);
  if (words.empty()) fail(ErrorCode::kEmptyInput, input.example_id + ": question is empty");

  auto answer_from_prefix = [&](int removed) {
    out.gap_ms = serial - tail_duration_ms(words, words.size() - static_cast<std::size_t>(removed), profile);
    out.answered_from_prefix = true;
    out.truncation_level = removed;
    out.quality_label = label_at(input, removed);
    out.completion_ms = out.gap_ms;
  };

  if (std::holds_alternative<SerialPolicy>(policy)) {
    out.gap_ms = serial;
    out.completion_ms = serial;
  } else if (const auto* eager = std::get_if<EagerPolicy>(&policy)) {
    if (eager->k < 1 || eager->k > corpus::kMaxLevel)
      fail(ErrorCode::kInvalidArgument, "eager truncation must be 1, 2 or 3 words");
    if (!input.truncations.count(eager->k))
      fail(ErrorCode::kMissingTruncation,
           input.example_id + ": no level-" + std::to_string(eager->k) + " truncation");
    answer_from_prefix(eager->k);
  } else {
    const auto& filler = std::get<FillerPolicy>(policy);
    if (!filler.model) fail(ErrorCode::kMissingModel, "filler policy needs a completeness model");
    std::vector<std::string> stream(words.begin(), words.end());
    auto inc = completeness::classify_incremental(*filler.model, stream, filler.cutoff);
    if (inc.fired_at && *inc.fired_at < words.size()) {
      answer_from_prefix(static_cast<int>(words.size() - *inc.fired_at));
    } else {
      out.gap_ms = filler.filler_latency_ms;
      out.used_filler = true;
      out.completion_ms = serial;
      out.filler_text = choose_filler(input.question,
                                      filler.templates ? *filler.templates : default_filler_templates(),
                                      filler.seed);
    }
  }
  return out;
}

FillerTemplates parse_filler_templates(std::string_view body) {
  FillerTemplates t;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    std::string line = text::trim(body.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto bar = line.find('|');
    if (bar == std::string::npos) fail(ErrorCode::kConfig, "filler template line lacks '|': " + line);
    std::string cls = text::to_lower_ascii(text::trim(std::string_view(line).substr(0, bar)));
    std::string phrase = text::trim(std::string_view(line).substr(bar + 1));
    if (cls.empty() || phrase.empty()) fail(ErrorCode::kConfig, "empty class or phrase: " + line);
    t.classes[cls].push_back(std::move(phrase));
  }
  return t;
}

const FillerTemplates& default_filler_templates() {
  static const FillerTemplates templates = parse_filler_templates(assets::kFillerTemplates);
  return templates;
}

std::string choose_filler(std::string_view prefix, const FillerTemplates& templates, std::uint64_t seed) {
  static const std::set<std::string, std::less<>> kClasses = {"who", "what", "where", "when", "why", "how"};
  std::string cls = "generic";
  for (const auto& tok : text::alnum_tokens(prefix))
    if (kClasses.count(tok)) {
      cls = tok;
      break;
    }
  auto it = templates.classes.find(cls);
  if (it == templates.classes.end() || it->second.empty()) it = templates.classes.find("generic");
  if (it == templates.classes.end() || it->second.empty())
    fail(ErrorCode::kConfig, "filler templates have no '" + cls + "' or generic phrases");
  const auto& phrases = it->second;
  return phrases[mix64(seed ^ stable_hash(prefix)) % phrases.size()];
}

std::vector<TurnInput> make_turn_inputs(std::span<const corpus::QAExample> examples,
                                        std::span<const corpus::TruncatedQuestion> variants,
                                        std::span<const experiment::TruncationLabel> labels,
                                        std::span<const experiment::ResponseRecord> responses,
                                        const LatencyProfile& profile, std::size_t n_turns,
                                        bool tokens_from_responses) {
  std::map<std::string, std::map<int, std::string>, std::less<>> truncs;
  for (const auto& v : variants) truncs[v.example_id][v.level] = v.text;
  std::map<std::string, std::map<int, experiment::Label>, std::less<>> labs;
  for (const auto& l : labels) labs[l.example_id][l.level] = l.label;
  std::map<std::string, int, std::less<>> tokens;
  for (const auto& r : responses)
    if (r.level == 0 && r.token_count > 0) tokens[r.example_id] = r.token_count;

  const std::size_t n = n_turns == 0 ? examples.size() : std::min(n_turns, examples.size());
  std::vector<TurnInput> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = examples[i];
    TurnInput in;
    in.example_id = ex.id;
    in.question = ex.question;
    if (auto it = truncs.find(ex.id); it != truncs.end()) in.truncations = it->second;
    if (auto it = labs.find(ex.id); it != labs.end()) in.labels = it->second;
    in.response_tokens = profile.default_response_tokens;
    if (tokens_from_responses)
      if (auto it = tokens.find(ex.id); it != tokens.end()) in.response_tokens = it->second;
    in.turn_index = i;
    out.push_back(std::move(in));
  }
  return out;
}

ComplianceReport run_policy(std::span<const TurnInput> turns, const TurnPolicy& policy,
                            const LatencyProfile& profile) {
  validate(profile);
  ComplianceReport r;
  r.policy = policy_name(policy);
  r.profile = profile.name;
  for (const auto& in : turns) {
    try {
      r.outcomes.push_back(simulate_turn(in, policy, profile));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMissingModel || e.code() == ErrorCode::kInvalidArgument) throw;
      r.errors.push_back(in.example_id + ": " + e.what());
    }
  }
  r.turns = r.outcomes.size();
  if (r.turns == 0) return r;

  const double n = static_cast<double>(r.turns);
  double sum = 0.0;
  std::size_t in_window = 0, fillers = 0, prefix = 0, lossy = 0;
  for (const auto& o : r.outcomes) {
    sum += o.gap_ms;
    in_window += HumanLatencyNorms::in_window(o.gap_ms);
    fillers += o.used_filler;
    if (o.answered_from_prefix) {
      ++prefix;
      lossy += o.quality_label == experiment::Label::kLateInformative;
    }
  }
  r.mean_gap_ms = sum / n;
  double ss = 0.0;
  for (const auto& o : r.outcomes) ss += (o.gap_ms - r.mean_gap_ms) * (o.gap_ms - r.mean_gap_ms);
  r.sd_gap_ms = std::sqrt(ss / n);
  r.fraction_in_window = static_cast<double>(in_window) / n;
  r.filler_rate = static_cast<double>(fillers) / n;
  r.prefix_answer_rate = static_cast<double>(prefix) / n;
  r.expected_quality_loss = prefix ? static_cast<double>(lossy) / static_cast<double>(prefix) : 0.0;
  return r;
}

json to_json(const ComplianceReport& r, bool include_turns) {
  std::size_t labeled = 0;
  for (const auto& o : r.outcomes) labeled += o.answered_from_prefix && o.quality_label.has_value();
  json j = {{"policy", r.policy},
            {"profile", r.profile},
            {"turns", r.turns},
            {"mean_gap_ms", r.mean_gap_ms},
            {"sd_gap_ms", r.sd_gap_ms},
            {"fraction_in_window", r.fraction_in_window},
            {"filler_rate", r.filler_rate},
            {"prefix_answer_rate", r.prefix_answer_rate},
            {"expected_quality_loss", r.expected_quality_loss},
            {"labeled_prefix_answers", labeled},
            {"human_window_ms", {HumanLatencyNorms::kWindowLowMs, HumanLatencyNorms::kWindowHighMs}},
            {"errors", r.errors}};
  if (include_turns) {
    json turns = json::array();
    for (const auto& o : r.outcomes) {
      json t = {{"example_id", o.example_id},
                {"gap_ms", o.gap_ms},
                {"used_filler", o.used_filler},
                {"answered_from_prefix", o.answered_from_prefix},
                {"completion_ms", o.completion_ms}};
      t["truncation_level"] = o.truncation_level ? json(*o.truncation_level) : json(nullptr);
      t["label"] = o.quality_label ? json(experiment::to_string(*o.quality_label)) : json(nullptr);
      if (o.used_filler) t["filler"] = o.filler_text;
      turns.push_back(std::move(t));
    }
    j["outcomes"] = std::move(turns);
  }
  return j;
}

std::string turns_csv(const ComplianceReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "example_id,policy,gap_ms,used_filler,answered_from_prefix,label\n";
  for (const auto& o : r.outcomes)
    out << o.example_id << ',' << o.policy << ',' << o.gap_ms << ',' << (o.used_filler ? "true" : "false") << ','
        << (o.answered_from_prefix ? "true" : "false") << ','
        << (o.quality_label ? experiment::to_string(*o.quality_label) : std::string_view{}) << '\n';
  return out.str();
}

}  // namespace turnpilot::turnsim
