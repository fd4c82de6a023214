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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "turnpilot/completeness.hpp"
#include "turnpilot/corpus.hpp"
#include "turnpilot/experiment.hpp"

// Discrete-event model of one conversational turn: the user's question is
// spoken word by word, the pipeline (ASR -> LLM -> TTS) runs, and the gap is
// measured from the end of the question to the first reply audio. Negative
// gaps are overlaps.
namespace turnpilot::turnsim {

// English turn-transition statistics.
struct HumanLatencyNorms {
  static constexpr double kMeanGapMs = 239.0;
  static constexpr double kSdGapMs = 519.0;
  static constexpr double kWindowLowMs = -280.0;
  static constexpr double kWindowHighMs = 758.0;
  static constexpr double kJapaneseMeanMs = 7.0;

  static constexpr bool in_window(double gap_ms) noexcept {
    return gap_ms >= kWindowLowMs && gap_ms <= kWindowHighMs;
  }
};

// Which ASR milestone the reply pipeline waits for.
enum class AsrMode { kFinal, kStable, kSlowFinal };

std::string_view to_string(AsrMode m) noexcept;
AsrMode asr_mode_from_string(std::string_view s);

struct Jitter {
  bool enabled = false;
  // Each stage latency is multiplied by exp(N(0, sigma^2)) (median 1).
  double sigma = 0.1;
  std::uint64_t seed = 1;

  friend bool operator==(const Jitter&, const Jitter&) = default;
};

struct LatencyProfile {
  std::string name = "custom";
  double asr_first_hyp_ms = 150.0;
  double asr_stable_ms = 500.0;
  double asr_final_ms = 650.0;
  double asr_slow_final_ms = 2000.0;
  AsrMode asr_mode = AsrMode::kFinal;
  double llm_initial_ms = 0.0;
  double llm_per_token_ms = 1000.0 / 240.0;
  std::optional<double> llm_worst_case_ms = 250.0;
  double tts_first_audio_min_ms = 80.0;
  double tts_first_audio_max_ms = 100.0;
  double speaking_rate_syll_per_s = 4.0;
  int default_response_tokens = 60;
  Jitter jitter;

  double asr_ms() const noexcept;
  friend bool operator==(const LatencyProfile&, const LatencyProfile&) = default;
};

void validate(const LatencyProfile& profile);

// Built-ins: "paper-groq", "paper-slow", "paper-azure-asr".
LatencyProfile builtin_profile(std::string_view name);
std::vector<std::string> builtin_profile_names();

// TOML-style key = value file; unknown keys are rejected with their line.
LatencyProfile parse_profile(std::string_view text, std::string_view origin = "<profile>");
LatencyProfile load_profile(const std::filesystem::path& path);
std::string format_profile(const LatencyProfile& profile);

struct SerialPolicy {};
struct EagerPolicy {
  int k = 1;
};
struct FillerTemplates;

struct FillerPolicy {
  const completeness::CompletenessModel* model = nullptr;
  double cutoff = 0.8;
  double filler_latency_ms = 100.0;
  std::uint64_t seed = 0;                     // filler rotation
  const FillerTemplates* templates = nullptr;  // null: embedded default
};
using TurnPolicy = std::variant<SerialPolicy, EagerPolicy, FillerPolicy>;

std::string policy_name(const TurnPolicy& policy);

struct TurnOutcome {
  std::string example_id;
  std::string policy;
  double gap_ms = 0.0;
  bool used_filler = false;
  bool answered_from_prefix = false;
  std::optional<int> truncation_level;
  std::optional<experiment::Label> quality_label;
  double completion_ms = 0.0;  // full answer start when a filler was used
  std::string filler_text;

  friend bool operator==(const TurnOutcome&, const TurnOutcome&) = default;
};

struct ComplianceReport {
  std::string policy;
  std::string profile;
  std::size_t turns = 0;
  double mean_gap_ms = 0.0;
  double sd_gap_ms = 0.0;
  double fraction_in_window = 0.0;
  double filler_rate = 0.0;
  double prefix_answer_rate = 0.0;
  double expected_quality_loss = 0.0;
  std::vector<TurnOutcome> outcomes;
  std::vector<std::string> errors;
};

// Vowel-group count per word (a e i o u y), at least 1 for a word with a letter.
int estimate_syllables(std::string_view text);
double utterance_duration_ms(std::string_view text, const LatencyProfile& profile);

// Stage latencies with jitter applied. `turn_index` selects the jitter stream.
struct PipelineLatency {
  double asr_ms = 0.0;
  double llm_ms = 0.0;
  double tts_ms = 0.0;
  double total() const noexcept { return asr_ms + llm_ms + tts_ms; }
};
PipelineLatency pipeline_latency(const LatencyProfile& profile, int response_tokens,
                                 std::uint64_t turn_index);

// Everything simulate_turn needs about one example.
struct TurnInput {
  std::string example_id;
  std::string question;  // full normalized question
  std::map<int, std::string> truncations;  // level -> text, level 0 optional
  std::map<int, experiment::Label> labels;  // level -> label
  int response_tokens = 60;
  std::uint64_t turn_index = 0;
};

TurnOutcome simulate_turn(const TurnInput& input, const TurnPolicy& policy,
                          const LatencyProfile& profile);

struct FillerTemplates {
  std::map<std::string, std::vector<std::string>> classes;  // "how", ..., "generic"
};

// Embedded asset (data/filler_templates.txt).
const FillerTemplates& default_filler_templates();
FillerTemplates parse_filler_templates(std::string_view text);

// Class = first interrogative token of the prefix, else "generic".
std::string choose_filler(std::string_view prefix, const FillerTemplates& templates,
                          std::uint64_t seed);

// Builds one TurnInput per example (first `n_turns`, 0 = all). Response
// length is the profile's worst-case default unless `tokens_from_responses`
// is set, in which case each example's res-0 token count is used.
std::vector<TurnInput> make_turn_inputs(std::span<const corpus::QAExample> examples,
                                        std::span<const corpus::TruncatedQuestion> variants,
                                        std::span<const experiment::TruncationLabel> labels,
                                        std::span<const experiment::ResponseRecord> responses,
                                        const LatencyProfile& profile, std::size_t n_turns = 0,
                                        bool tokens_from_responses = false);

ComplianceReport run_policy(std::span<const TurnInput> turns, const TurnPolicy& policy,
                            const LatencyProfile& profile);

nlohmann::json to_json(const ComplianceReport& report, bool include_turns = true);
// One row per turn: example_id,policy,gap_ms,used_filler,answered_from_prefix,label
std::string turns_csv(const ComplianceReport& report);

}  // namespace turnpilot::turnsim
