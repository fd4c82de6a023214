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

#include "turnpilot/completeness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "turnpilot/error.hpp"
#include "turnpilot/hash.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/text.hpp"
#include "turnpilot_assets.hpp"

namespace turnpilot::completeness {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFeatureSeed = kHashSeed ^ 0x6a09e667f3bcc909ULL;

std::vector<std::string> parse_word_list(std::string_view asset) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < asset.size()) {
    std::size_t nl = asset.find('\n', pos);
    if (nl == std::string_view::npos) nl = asset.size();
    std::string line = text::trim(asset.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    out.push_back(text::to_lower_ascii(line));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::uint32_t feature_index(std::string_view feature) {
  return static_cast<std::uint32_t>(stable_hash(feature, kFeatureSeed) % kHashedDim);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double raw_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_two_classes(std::span<const Instance> data) {
  std::size_t pos = 0;
  for (const auto& in : data) pos += in.label == 1;
  if (data.size() < 2 || pos == 0 || pos == data.size())
    fail(ErrorCode::kSingleClassData, "training needs at least two instances covering both classes (" +
                                          std::to_string(pos) + " positive of " +
                                          std::to_string(data.size()) + ")");
}

// Fisher-Yates driven by raw mt19937_64 output, which the standard pins down.
void seeded_shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
}

}  // namespace

std::string TrainConfig::digest() const {
  json j = {{"learning_rate", learning_rate}, {"l2", l2},     {"epochs", epochs},
            {"batch_size", batch_size},       {"seed", seed}, {"split", split}};
  return digest128(io::canonical(j));
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate))
    fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (!(c.l2 >= 0.0) || !std::isfinite(c.l2)) fail(ErrorCode::kInvalidArgument, "L2 strength must be >= 0");
  if (c.epochs < 0) fail(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  if (c.batch_size < 1) fail(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (!(c.split > 0.0 && c.split < 1.0)) fail(ErrorCode::kInvalidArgument, "split fraction must lie in (0, 1)");
}

const std::vector<std::string>& continuation_words() {
  static const std::vector<std::string> words = parse_word_list(assets::kContinuationWords);
  return words;
}

const std::vector<std::string>& interrogative_words() {
  static const std::vector<std::string> words = {"how",  "what", "when",  "where",
                                                 "which", "who", "whom", "whose", "why"};
  return words;
}

bool is_continuation_word(std::string_view token) {
  const auto& w = continuation_words();
  return std::binary_search(w.begin(), w.end(), text::to_lower_ascii(token));
}

bool is_interrogative_word(std::string_view token) {
  const auto& w = interrogative_words();
  return std::binary_search(w.begin(), w.end(), text::to_lower_ascii(token));
}

FeatureVector extract_features(std::string_view prefix) {
  if (text::trim(prefix).empty()) fail(ErrorCode::kEmptyInput, "prefix is empty");
  const auto tokens = text::alnum_tokens(prefix);
  std::map<std::uint32_t, double> counts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    counts[feature_index("u:" + tokens[i])] += 1.0;
    if (i + 1 < tokens.size()) counts[feature_index("b:" + tokens[i] + " " + tokens[i + 1])] += 1.0;
  }
  FeatureVector x;
  x.indices.reserve(counts.size());
  x.values.reserve(counts.size());
  for (const auto& [idx, v] : counts) {
    x.indices.push_back(idx);
    x.values.push_back(v);
  }
  const double words = static_cast<double>(text::word_count(prefix));
  x.dense[kSlotWordCount] = words / 20.0;
  if (!tokens.empty()) {
    x.dense[kSlotContinuation] = is_continuation_word(tokens.back()) ? 1.0 : 0.0;
    x.dense[kSlotInterrogative] = is_interrogative_word(tokens.back()) ? 1.0 : 0.0;
  }
  x.dense[kSlotLengthFraction] = words / kMeanQuestionWords;
  return x;
}

std::vector<Instance> build_training_set(std::span<const corpus::QAExample> examples,
                                         std::span<const experiment::TruncationLabel> labels,
                                         bool include_full) {
  std::map<std::string_view, const corpus::QAExample*> by_id;
  for (const auto& ex : examples) by_id[ex.id] = &ex;

  std::string dangling;
  for (const auto& l : labels)
    if (!by_id.count(l.example_id)) dangling += (dangling.empty() ? "" : ", ") + l.example_id;
  if (!dangling.empty()) fail(ErrorCode::kMissingPairing, "labels reference unknown examples: " + dangling);

  std::vector<Instance> out;
  for (const auto& l : labels) {
    std::string prefix = corpus::truncate_words(by_id.at(l.example_id)->question, l.level);
    out.push_back({extract_features(prefix), l.label == experiment::Label::kLateUninformative ? 1 : 0,
                   std::move(prefix)});
  }
  if (include_full)
    for (const auto& ex : examples) out.push_back({extract_features(ex.question), 1, ex.question});
  return out;
}

double decision_value(const CompletenessModel& model, const FeatureVector& x) {
  double z = model.bias;
  for (std::size_t i = 0; i < x.indices.size(); ++i) z += model.weights[x.indices[i]] * x.values[i];
  for (std::size_t j = 0; j < kDenseDim; ++j) z += model.weights[kHashedDim + j] * x.dense[j];
  return z;
}

double sigmoid(double z) noexcept {
  return std::clamp(raw_sigmoid(z), std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

LossGradient loss_and_gradient(const CompletenessModel& model, std::span<const Instance> batch, double l2) {
  LossGradient g;
  g.weight_grad.assign(kFeatureDim, 0.0);
  if (batch.empty()) return g;
  const double m = static_cast<double>(batch.size());
  for (const auto& in : batch) {
    const double z = decision_value(model, in.x);
    g.loss += (softplus(z) - in.label * z) / m;
    const double r = (raw_sigmoid(z) - in.label) / m;
    for (std::size_t i = 0; i < in.x.indices.size(); ++i) g.weight_grad[in.x.indices[i]] += r * in.x.values[i];
    for (std::size_t j = 0; j < kDenseDim; ++j) g.weight_grad[kHashedDim + j] += r * in.x.dense[j];
    g.bias_grad += r;
  }
  double norm2 = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    norm2 += model.weights[i] * model.weights[i];
    g.weight_grad[i] += l2 * model.weights[i];
  }
  g.loss += 0.5 * l2 * norm2;
  return g;
}

CompletenessModel train(std::span<const Instance> data, const TrainConfig& config) {
  validate(config);
  require_two_classes(data);

  CompletenessModel model;
  model.config_digest = config.digest();
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> residual;

  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    seeded_shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double m = static_cast<double>(end - start);
      residual.assign(end - start, 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const auto& in = data[order[b]];
        residual[b - start] = (raw_sigmoid(decision_value(model, in.x)) - in.label) / m;
      }
      // Gradient step: decay for the L2 term, then the sparse data term.
      if (config.l2 > 0.0) {
        const double decay = 1.0 - config.learning_rate * config.l2;
        for (double& w : model.weights) w *= decay;
      }
      for (std::size_t b = start; b < end; ++b) {
        const auto& in = data[order[b]];
        const double step = config.learning_rate * residual[b - start];
        for (std::size_t i = 0; i < in.x.indices.size(); ++i) model.weights[in.x.indices[i]] -= step * in.x.values[i];
        for (std::size_t j = 0; j < kDenseDim; ++j) model.weights[kHashedDim + j] -= step * in.x.dense[j];
        model.bias -= step;
      }
    }
    const double loss = loss_and_gradient(model, data, config.l2).loss;
    if (!std::isfinite(loss) || !std::isfinite(model.bias)) {
      double max_abs = 0.0;
      for (double w : model.weights) max_abs = std::max(max_abs, std::fabs(w));
      fail(ErrorCode::kNonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                          " (learning rate " + std::to_string(config.learning_rate) +
                                          ", max |w| " + std::to_string(max_abs) + ")");
    }
  }
  return model;
}

std::pair<std::vector<Instance>, std::vector<Instance>> split(std::span<const Instance> data,
                                                              const TrainConfig& config) {
  validate(config);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed ^ 0x51u);
  seeded_shuffle(order, rng);
  std::size_t n_train = static_cast<std::size_t>(std::llround(static_cast<double>(data.size()) * config.split));
  if (data.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, data.size() - 1);
  std::pair<std::vector<Instance>, std::vector<Instance>> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? out.first : out.second).push_back(data[order[i]]);
  return out;
}

double predict(const CompletenessModel& model, const FeatureVector& x) {
  return sigmoid(decision_value(model, x));
}

double predict(const CompletenessModel& model, std::string_view prefix) {
  return predict(model, extract_features(prefix));
}

IncrementalResult classify_incremental(const CompletenessModel& model, std::span<const std::string> words,
                                       double cutoff) {
  if (!(cutoff > 0.0 && cutoff < 1.0)) fail(ErrorCode::kInvalidArgument, "cutoff must lie in (0, 1)");
  IncrementalResult out;
  std::string prefix;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!prefix.empty()) prefix += ' ';
    prefix += words[i];
    const double s = predict(model, prefix);
    out.scores.push_back(s);
    if (!out.fired_at && s >= cutoff) out.fired_at = i + 1;
  }
  return out;
}

Metrics evaluate(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) fail(ErrorCode::kInvalidArgument, "scores and labels differ in length");
  if (scores.empty()) fail(ErrorCode::kEmptyInput, "nothing to evaluate");
  Metrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= 0.5;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++m.tp;
    else if (predicted) ++m.fp;
    else if (actual) ++m.fn;
    else ++m.tn;
  }
  const double n = static_cast<double>(scores.size());
  m.accuracy = static_cast<double>(m.tp + m.tn) / n;
  m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;

  const std::size_t n_pos = m.tp + m.fn;
  const std::size_t n_neg = m.fp + m.tn;
  if (n_pos && n_neg) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
      const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
      for (std::size_t t = i; t < j; ++t)
        if (labels[idx[t]] == 1) rank_sum_pos += avg_rank;
      i = j;
    }
    const double p = static_cast<double>(n_pos), q = static_cast<double>(n_neg);
    m.auc = (rank_sum_pos - p * (p + 1) / 2.0) / (p * q);
  }
  return m;
}

Metrics evaluate(const CompletenessModel& model, std::span<const Instance> held_out) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& in : held_out) {
    scores.push_back(predict(model, in.x));
    labels.push_back(in.label);
  }
  return evaluate(scores, labels);
}

json to_json(const CompletenessModel& model) {
  return {{"dim", model.weights.size()},
          {"weights", model.weights},
          {"bias", model.bias},
          {"config_digest", model.config_digest},
          {"label_provenance", {{"theta", model.provenance.theta}, {"run_id", model.provenance.run_id}}}};
}

CompletenessModel model_from_json(const json& j) {
  CompletenessModel m;
  const auto dim = j.at("dim").get<std::size_t>();
  m.weights = j.at("weights").get<std::vector<double>>();
  if (dim != kFeatureDim || m.weights.size() != dim)
    fail(ErrorCode::kMalformedRecord, "model dim " + std::to_string(dim) + " with " +
                                          std::to_string(m.weights.size()) + " weights; expected " +
                                          std::to_string(kFeatureDim));
  m.bias = j.at("bias").get<double>();
  for (double w : m.weights)
    if (!std::isfinite(w)) fail(ErrorCode::kMalformedRecord, "model has non-finite weights");
  if (!std::isfinite(m.bias)) fail(ErrorCode::kMalformedRecord, "model has a non-finite bias");
  m.config_digest = j.value("config_digest", "");
  if (j.contains("label_provenance")) {
    m.provenance.theta = j["label_provenance"].value("theta", 0.0);
    m.provenance.run_id = j["label_provenance"].value("run_id", "");
  }
  return m;
}

void save_model(const std::filesystem::path& path, const CompletenessModel& model) {
  io::write_file_atomic(path, to_json(model).dump() + "\n");
}

CompletenessModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
}

void write_instances(const std::filesystem::path& path, std::span<const Instance> data) {
  std::vector<json> rows;
  rows.reserve(data.size());
  for (const auto& in : data) rows.push_back({{"prefix", in.prefix}, {"class", in.label}});
  io::write_jsonl(path, rows);
}

std::vector<Instance> read_instances(const std::filesystem::path& path) {
  std::vector<Instance> out;
  io::for_each_jsonl(path, [&](const json& r, std::size_t line) {
    const int cls = r.at("class").get<int>();
    if (cls != 0 && cls != 1)
      fail(ErrorCode::kMalformedRecord, path.string() + ":" + std::to_string(line) + ": class must be 0 or 1");
    std::string prefix = r.at("prefix").get<std::string>();
    out.push_back({extract_features(prefix), cls, std::move(prefix)});
  });
  return out;
}

}  // namespace turnpilot::completeness
