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

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "turnpilot/corpus.hpp"
#include "turnpilot/providers.hpp"
#include "turnpilot/semscore.hpp"

namespace turnpilot::experiment {

// res-<level>: the answer to the question with `level` final words removed.
struct ResponseRecord {
  std::string example_id;
  int level = 0;
  std::string text;
  int token_count = 0;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

enum class Label { kLateInformative, kLateUninformative };

std::string_view to_string(Label l) noexcept;
Label label_from_string(std::string_view s);

struct TruncationLabel {
  std::string example_id;
  int level = 1;
  double similarity_to_res0 = 0.0;
  Label label = Label::kLateInformative;

  friend bool operator==(const TruncationLabel&, const TruncationLabel&) = default;
};

struct GenerationFailure {
  std::string example_id;
  int level = 0;
  std::string message;
};

struct GenerateOptions {
  std::string model_id = "gpt-4";
  double temperature = 0.0;
  int max_tokens = 256;
  std::size_t parallelism = 1;
  double failure_ceiling = 0.02;
  providers::CallPolicy policy;
  // Called once per finished record, serialized; used for resumable logs.
  std::function<void(const ResponseRecord&)> on_record;
  std::function<void(const GenerationFailure&)> on_failure;
};

struct GenerateResult {
  std::vector<ResponseRecord> records;  // sorted (example_id, level)
  std::vector<GenerationFailure> failures;
  std::size_t generated = 0;  // chat_complete calls made this run
  std::size_t reused = 0;     // records carried over from `existing`
};

// Only variants without a record in `existing` are generated. Throws
// kFailureCeiling when failures / variants exceeds the ceiling.
GenerateResult generate_responses(std::span<const corpus::TruncatedQuestion> variants,
                                  providers::ChatBackend& chat,
                                  const GenerateOptions& options,
                                  std::span<const ResponseRecord> existing = {});

// One ref_vs_res0 score per level-0 record. Throws kMissingPairing listing ids
// whose example is absent.
std::vector<semscore::ScoreRecord> score_reference(
    std::span<const ResponseRecord> responses, std::span<const corpus::QAExample> examples,
    providers::EmbeddingBackend& embedder, const providers::CallPolicy& policy = {});

struct GoldSubset {
  double threshold = 0.0;
  std::set<std::string> ids;
};

// threshold = type-7 percentile; ids score strictly above it (or at/above it
// when `inclusive`).
GoldSubset select_gold_subset(std::span<const semscore::ScoreRecord> reference_scores,
                              int percentile, bool inclusive = false);

struct TruncationScores {
  std::vector<semscore::ScoreRecord> scores;
  std::vector<std::string> omissions;  // "<id> level <k>: <reason>"
};

// res0_vs_res<k> per (id, k). `ids == nullptr` scores every example.
TruncationScores score_truncation(std::span<const ResponseRecord> responses,
                                  const std::set<std::string>* ids,
                                  providers::EmbeddingBackend& embedder,
                                  const providers::CallPolicy& policy = {});

// value >= theta -> LateUninformative.
std::vector<TruncationLabel> label_examples(std::span<const semscore::ScoreRecord> scores,
                                            double theta);

struct Retained {
  std::size_t count = 0;
  double fraction = 0.0;

  friend bool operator==(const Retained&, const Retained&) = default;
};

std::map<int, Retained> count_retained(std::span<const TruncationLabel> labels,
                                       std::size_t total);

nlohmann::json to_json(const ResponseRecord& r);
ResponseRecord response_from_json(const nlohmann::json& j);
nlohmann::json to_json(const semscore::ScoreRecord& s);
semscore::ScoreRecord score_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TruncationLabel& l);
TruncationLabel label_from_json(const nlohmann::json& j);

std::vector<ResponseRecord> read_responses(const std::filesystem::path& path);
void write_responses(const std::filesystem::path& path, std::span<const ResponseRecord> r);
std::vector<semscore::ScoreRecord> read_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, std::span<const semscore::ScoreRecord> s);
std::vector<TruncationLabel> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, std::span<const TruncationLabel> l);

}  // namespace turnpilot::experiment
