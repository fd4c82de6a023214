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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "turnpilot/corpus.hpp"
#include "turnpilot/experiment.hpp"

// Semantic-completeness classifier: logistic regression over hashed
// unigram/bigram counts plus a few dense cues about the prefix ending.
namespace turnpilot::completeness {

inline constexpr std::size_t kHashedDim = std::size_t{1} << 16;
inline constexpr std::size_t kDenseDim = 8;
inline constexpr std::size_t kFeatureDim = kHashedDim + kDenseDim;

// Dense slot offsets (after the hashed block).
enum DenseSlot : std::size_t {
  kSlotWordCount = 0,       // prefix words / 20
  kSlotContinuation = 1,    // last token is a closed-class continuation word
  kSlotInterrogative = 2,   // last token is a wh-word / question opener
  kSlotLengthFraction = 3,  // prefix words / mean question length
};

// Mean NQ question length in words, used for kSlotLengthFraction.
inline constexpr double kMeanQuestionWords = 9.0;

struct FeatureVector {
  std::vector<std::uint32_t> indices;  // strictly increasing, < kHashedDim
  std::vector<double> values;
  std::array<double, kDenseDim> dense{};

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct Instance {
  FeatureVector x;
  int label = 0;  // 1 = complete (answerable from the prefix)
  std::string prefix;
};

struct TrainConfig {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  int epochs = 20;
  int batch_size = 16;
  std::uint64_t seed = 42;
  double split = 0.8;  // train fraction

  std::string digest() const;
};

void validate(const TrainConfig& config);

struct LabelProvenance {
  double theta = 0.0;
  std::string run_id;
};

struct CompletenessModel {
  std::vector<double> weights = std::vector<double>(kFeatureDim, 0.0);
  double bias = 0.0;
  std::string config_digest;
  LabelProvenance provenance;
};

const std::vector<std::string>& continuation_words();
const std::vector<std::string>& interrogative_words();
bool is_continuation_word(std::string_view token);
bool is_interrogative_word(std::string_view token);

// Throws kEmptyInput for a blank prefix.
FeatureVector extract_features(std::string_view prefix);

// Instances for each labeled (id, k): features of the k-word-truncated
// question, class 1 for LateUninformative. With include_full, every example
// also contributes its full question as class 1. Throws
// kMissingPairing on labels naming unknown ids.
std::vector<Instance> build_training_set(std::span<const corpus::QAExample> examples,
                                         std::span<const experiment::TruncationLabel> labels,
                                         bool include_full);

double decision_value(const CompletenessModel& model, const FeatureVector& x);
double sigmoid(double z) noexcept;

// Mean log-loss over `batch` plus (l2/2)|w|^2. Gradients are dense.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> weight_grad;
  double bias_grad = 0.0;
};
LossGradient loss_and_gradient(const CompletenessModel& model, std::span<const Instance> batch,
                               double l2);

// Mini-batch SGD from zero weights; per-epoch shuffle drawn from config.seed.
CompletenessModel train(std::span<const Instance> data, const TrainConfig& config);

// Deterministic seeded split into (train, test) by config.split.
std::pair<std::vector<Instance>, std::vector<Instance>> split(std::span<const Instance> data,
                                                              const TrainConfig& config);

double predict(const CompletenessModel& model, std::string_view prefix);
double predict(const CompletenessModel& model, const FeatureVector& x);

struct IncrementalResult {
  std::vector<double> scores;           // scores[i] for the first i+1 words
  std::optional<std::size_t> fired_at;  // 1-based word index
};

IncrementalResult classify_incremental(const CompletenessModel& model,
                                       std::span<const std::string> words, double cutoff);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // empty with one class present
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Threshold-0.5 confusion metrics; rank-based (Mann-Whitney) AUC.
Metrics evaluate(std::span<const double> scores, std::span<const int> labels);
Metrics evaluate(const CompletenessModel& model, std::span<const Instance> held_out);

nlohmann::json to_json(const CompletenessModel& model);
CompletenessModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const CompletenessModel& model);
CompletenessModel load_model(const std::filesystem::path& path);

// Training data files: JSONL {prefix, class}.
void write_instances(const std::filesystem::path& path, std::span<const Instance> data);
std::vector<Instance> read_instances(const std::filesystem::path& path);

}  // namespace turnpilot::completeness
