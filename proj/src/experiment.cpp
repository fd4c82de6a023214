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

#include "turnpilot/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

#include "turnpilot/error.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/log.hpp"

namespace turnpilot::experiment {

using nlohmann::json;
using semscore::Comparison;
using semscore::ScoreRecord;

std::string_view to_string(Label l) noexcept {
  return l == Label::kLateInformative ? "LateInformative" : "LateUninformative";
}

Label label_from_string(std::string_view s) {
  if (s == "LateInformative") return Label::kLateInformative;
  if (s == "LateUninformative") return Label::kLateUninformative;
  fail(ErrorCode::kMalformedRecord, "unknown label '" + std::string(s) + "'");
}

namespace {

using Key = std::pair<std::string, int>;

bool is_fatal(ErrorCode code) {
  return code == ErrorCode::kAuthFailure || code == ErrorCode::kMissingCredentials ||
         code == ErrorCode::kConfig;
}

}  // namespace

GenerateResult generate_responses(std::span<const corpus::TruncatedQuestion> variants,
                                  providers::ChatBackend& chat, const GenerateOptions& options,
                                  std::span<const ResponseRecord> existing) {
  if (variants.empty()) fail(ErrorCode::kEmptyInput, "no variants to generate responses for");
  if (!(options.failure_ceiling >= 0.0 && options.failure_ceiling <= 1.0))
    fail(ErrorCode::kInvalidArgument, "failure ceiling must lie in [0, 1]");

  std::map<Key, ResponseRecord> have;
  for (const auto& r : existing) have.emplace(Key{r.example_id, r.level}, r);

  GenerateResult result;
  std::vector<const corpus::TruncatedQuestion*> todo;
  std::set<Key> wanted;
  for (const auto& v : variants) {
    Key key{v.example_id, v.level};
    if (!wanted.insert(key).second)
      fail(ErrorCode::kInvalidArgument, "duplicate variant " + v.example_id + " level " + std::to_string(v.level));
    if (auto it = have.find(key); it != have.end()) {
      result.records.push_back(it->second);
      ++result.reused;
    } else {
      todo.push_back(&v);
    }
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const auto& v = *todo[i];
      providers::ChatRequest req{v.text, options.model_id, options.temperature, options.max_tokens};
      try {
        auto resp = providers::chat_complete(req, chat, options.policy);
        ResponseRecord rec{v.example_id, v.level, resp.text, resp.token_count};
        std::lock_guard lock(mu);
        ++result.generated;
        if (options.on_record) options.on_record(rec);
        result.records.push_back(std::move(rec));
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        ++result.generated;
        if (is_fatal(e.code())) {
          if (!fatal) fatal = std::current_exception();
          stop.store(true);
          return;
        }
        log::warn("generation failed for " + v.example_id + " level " + std::to_string(v.level) +
                  ": " + e.what());
        result.failures.push_back({v.example_id, v.level, e.what()});
        if (options.on_failure) options.on_failure(result.failures.back());
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(1, todo.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  auto by_key = [](const auto& a, const auto& b) {
    return std::tie(a.example_id, a.level) < std::tie(b.example_id, b.level);
  };
  std::sort(result.records.begin(), result.records.end(), by_key);
  std::sort(result.failures.begin(), result.failures.end(), by_key);

  const double fraction = static_cast<double>(result.failures.size()) / static_cast<double>(variants.size());
  if (fraction > options.failure_ceiling)
    fail(ErrorCode::kFailureCeiling,
         std::to_string(result.failures.size()) + " of " + std::to_string(variants.size()) +
             " generations failed, above the " + std::to_string(options.failure_ceiling * 100.0) +
             "% ceiling");
  return result;
}

std::vector<ScoreRecord> score_reference(std::span<const ResponseRecord> responses,
                                         std::span<const corpus::QAExample> examples,
                                         providers::EmbeddingBackend& embedder,
                                         const providers::CallPolicy& policy) {
  std::map<std::string_view, const corpus::QAExample*> by_id;
  for (const auto& ex : examples) by_id[ex.id] = &ex;

  std::vector<const ResponseRecord*> level0;
  std::vector<std::string> missing;
  for (const auto& r : responses) {
    if (r.level != 0) continue;
    if (!by_id.count(r.example_id)) missing.push_back(r.example_id);
    level0.push_back(&r);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    fail(ErrorCode::kMissingPairing, "res-0 records without a corpus example: " + ids);
  }

  std::vector<ScoreRecord> out;
  out.reserve(level0.size());
  for (const auto* r : level0) {
    const auto* ex = by_id.at(r->example_id);
    out.push_back({r->example_id, Comparison::kRefVsRes0,
                   semscore::semscore(ex->reference_answer, r->text, embedder, policy)});
  }
  return out;
}

GoldSubset select_gold_subset(std::span<const ScoreRecord> reference_scores, int percentile,
                              bool inclusive) {
  if (percentile <= 0 || percentile >= 100)
    fail(ErrorCode::kInvalidArgument, "gold percentile must lie strictly between 0 and 100");
  std::vector<double> values;
  for (const auto& s : reference_scores)
    if (s.comparison == Comparison::kRefVsRes0) values.push_back(s.value);
  if (values.empty()) fail(ErrorCode::kEmptyInput, "no ref_vs_res0 scores to select from");

  GoldSubset gold;
  gold.threshold = semscore::percentile(values, percentile);
  for (const auto& s : reference_scores) {
    if (s.comparison != Comparison::kRefVsRes0) continue;
    if (s.value > gold.threshold || (inclusive && s.value == gold.threshold)) gold.ids.insert(s.example_id);
  }
  return gold;
}

TruncationScores score_truncation(std::span<const ResponseRecord> responses,
                                  const std::set<std::string>* ids,
                                  providers::EmbeddingBackend& embedder,
                                  const providers::CallPolicy& policy) {
  std::map<Key, const ResponseRecord*> index;
  std::set<int> levels_present;
  std::vector<std::string> order;
  for (const auto& r : responses) {
    index[{r.example_id, r.level}] = &r;
    if (r.level > 0) levels_present.insert(r.level);
    if (r.level == 0) order.push_back(r.example_id);
  }

  TruncationScores out;
  auto omit = [&](const std::string& id, int k, const std::string& why) {
    std::string line = id + " level " + std::to_string(k) + ": " + why;
    log::info("omitting truncation score " + line);
    out.omissions.push_back(std::move(line));
  };

  std::vector<std::string> targets;
  if (ids) {
    targets.assign(ids->begin(), ids->end());
  } else {
    targets = order;
  }
  std::sort(targets.begin(), targets.end());

  for (const auto& id : targets) {
    auto base = index.find({id, 0});
    if (base == index.end()) {
      for (int k : levels_present) omit(id, k, "no res-0 response");
      continue;
    }
    for (int k : levels_present) {
      auto it = index.find({id, k});
      if (it == index.end()) {
        omit(id, k, "no res-" + std::to_string(k) + " response");
        continue;
      }
      out.scores.push_back({id, semscore::truncation_comparison(k),
                            semscore::semscore(base->second->text, it->second->text, embedder, policy)});
    }
  }
  return out;
}

std::vector<TruncationLabel> label_examples(std::span<const ScoreRecord> scores, double theta) {
  if (!(theta >= -1.0 && theta <= 1.0)) fail(ErrorCode::kInvalidArgument, "theta must lie in [-1, 1]");
  std::vector<TruncationLabel> out;
  for (const auto& s : scores) {
    const int level = semscore::comparison_level(s.comparison);
    if (level == 0) continue;
    out.push_back({s.example_id, level, s.value,
                   s.value >= theta ? Label::kLateUninformative : Label::kLateInformative});
  }
  return out;
}

std::map<int, Retained> count_retained(std::span<const TruncationLabel> labels, std::size_t total) {
  std::map<int, Retained> out{{1, {}}, {2, {}}, {3, {}}};
  for (const auto& l : labels)
    if (l.label == Label::kLateUninformative) ++out[l.level].count;
  for (auto& [level, r] : out) {
    if (r.count > total)
      fail(ErrorCode::kInvalidArgument, "retained count at level " + std::to_string(level) +
                                            " exceeds total " + std::to_string(total));
    r.fraction = total == 0 ? 0.0 : static_cast<double>(r.count) / static_cast<double>(total);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const ResponseRecord& r) {
  return {{"example_id", r.example_id}, {"level", r.level}, {"text", r.text}, {"token_count", r.token_count}};
}

ResponseRecord response_from_json(const json& j) {
  ResponseRecord r{j.at("example_id").get<std::string>(), j.at("level").get<int>(),
                   j.at("text").get<std::string>(), j.at("token_count").get<int>()};
  if (r.level < 0 || r.level > corpus::kMaxLevel) fail(ErrorCode::kMalformedRecord, "response level out of range");
  return r;
}

json to_json(const ScoreRecord& s) {
  return {{"example_id", s.example_id}, {"comparison", semscore::to_string(s.comparison)}, {"value", s.value}};
}

ScoreRecord score_from_json(const json& j) {
  ScoreRecord s{j.at("example_id").get<std::string>(),
                semscore::comparison_from_string(j.at("comparison").get<std::string>()),
                j.at("value").get<double>()};
  if (!(s.value >= -1.0 && s.value <= 1.0)) fail(ErrorCode::kMalformedRecord, "score outside [-1, 1]");
  return s;
}

json to_json(const TruncationLabel& l) {
  return {{"example_id", l.example_id},
          {"level", l.level},
          {"similarity_to_res0", l.similarity_to_res0},
          {"label", to_string(l.label)}};
}

TruncationLabel label_from_json(const json& j) {
  return {j.at("example_id").get<std::string>(), j.at("level").get<int>(),
          j.at("similarity_to_res0").get<double>(), label_from_string(j.at("label").get<std::string>())};
}

namespace {

template <typename T, typename Parse>
std::vector<T> read_all(const std::filesystem::path& path, Parse parse) {
  std::vector<T> out;
  io::for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(parse(j)); });
  return out;
}

template <typename T>
void write_all(const std::filesystem::path& path, std::span<const T> items) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.push_back(to_json(item));
  io::write_jsonl(path, rows);
}

}  // namespace

std::vector<ResponseRecord> read_responses(const std::filesystem::path& path) {
  return read_all<ResponseRecord>(path, response_from_json);
}
void write_responses(const std::filesystem::path& path, std::span<const ResponseRecord> r) {
  write_all(path, r);
}
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
  return read_all<ScoreRecord>(path, score_from_json);
}
void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> s) { write_all(path, s); }
std::vector<TruncationLabel> read_labels(const std::filesystem::path& path) {
  return read_all<TruncationLabel>(path, label_from_json);
}
void write_labels(const std::filesystem::path& path, std::span<const TruncationLabel> l) { write_all(path, l); }

}  // namespace turnpilot::experiment
