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

#include "turnpilot/corpus.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "turnpilot/error.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/text.hpp"

namespace turnpilot::corpus {

using nlohmann::json;

namespace {

std::string id_string(const json& id) {
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return id.dump();
  throw json::type_error::create(302, "example_id must be a string or integer", &id);
}

std::string strip_tags(std::string_view token) {
  std::string out;
  std::size_t i = 0;
  while (i < token.size()) {
    if (token[i] == '<') {
      std::size_t close = token.find('>', i);
      if (close != std::string_view::npos) {
        i = close + 1;
        continue;
      }
    }
    out += token[i++];
  }
  return out;
}

struct Span {
  int start = -1;
  int end = -1;
};

// The first annotation's long answer, when present.
Span first_long_answer(const json& record) {
  const auto it = record.find("annotations");
  if (it == record.end()) throw json::out_of_range::create(403, "key 'annotations' not found", &record);
  if (!it->is_array()) throw json::type_error::create(302, "annotations must be an array", &record);
  if (it->empty()) return {};
  const json& la = it->front().at("long_answer");
  return {la.at("start_token").get<int>(), la.at("end_token").get<int>()};
}

}  // namespace

std::string normalize_question(std::string_view raw) {
  std::string collapsed = text::join(text::split_words(raw), " ");
  while (!collapsed.empty() &&
         (collapsed.back() == '?' || collapsed.back() == '.' || collapsed.back() == '!' ||
          collapsed.back() == ' '))
    collapsed.pop_back();
  if (collapsed.empty()) fail(ErrorCode::kEmptyQuestion, "question is empty after normalization");
  return collapsed;
}

std::string truncate_words(std::string_view question, int k) {
  if (k < 0) fail(ErrorCode::kInvalidArgument, "truncation level must be >= 0");
  if (k == 0) return std::string(question);
  auto words = text::split_words(question);
  if (words.size() <= static_cast<std::size_t>(k))
    fail(ErrorCode::kTooShort, "'" + std::string(question) + "' has " +
                                   std::to_string(words.size()) + " words, cannot remove " +
                                   std::to_string(k));
  words.resize(words.size() - static_cast<std::size_t>(k));
  return text::join(words, " ");
}

std::string extract_long_answer(std::string_view document_text, int start_token, int end_token) {
  auto tokens = text::split_words(document_text);
  if (start_token < 0 || end_token <= start_token ||
      static_cast<std::size_t>(end_token) > tokens.size())
    return {};
  std::string out;
  for (int i = start_token; i < end_token; ++i) {
    std::string t = strip_tags(tokens[static_cast<std::size_t>(i)]);
    if (t.empty()) continue;
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
  if (options.limit < 1) fail(ErrorCode::kInvalidArgument, "limit must be >= 1");
  Corpus corpus;
  auto& m = corpus.manifest;
  m.source_path = path.string();
  m.requested_limit = options.limit;
  m.filter_before_limit = options.filter_before_limit;

  std::set<std::string> seen_ids;
  bool done = false;
  io::for_each_jsonl(path, [&](const json& record, std::size_t line) {
    if (done) return;
    const std::string where = path.string() + ":" + std::to_string(line) + ": ";
    if (!record.is_object()) fail(ErrorCode::kMalformedRecord, where + "record is not an object");
    ++m.records_scanned;

    std::string id = id_string(record.at("example_id"));
    const std::string raw_question = record.at("question_text").get<std::string>();
    const std::string document = record.at("document_text").get<std::string>();
    Span span = first_long_answer(record);

    std::string reference = extract_long_answer(document, span.start, span.end);
    if (reference.empty()) {
      ++m.dropped_negative_controls;
    } else {
      QAExample ex;
      ex.id = std::move(id);
      try {
        ex.question = normalize_question(raw_question);
      } catch (const Error& e) {
        fail(ErrorCode::kMalformedRecord, where + e.what());
      }
      if (!seen_ids.insert(ex.id).second)
        fail(ErrorCode::kMalformedRecord, where + "duplicate example_id " + ex.id);
      ex.reference_answer = std::move(reference);
      ex.word_count = static_cast<int>(text::word_count(ex.question));
      corpus.examples.push_back(std::move(ex));
      ++m.loaded;
    }

    if (options.filter_before_limit ? m.loaded >= options.limit
                                    : m.records_scanned >= options.limit)
      done = true;
  });

  if (corpus.examples.empty())
    fail(ErrorCode::kZeroUsableExamples,
         "no usable examples in " + path.string() + " (" + std::to_string(m.records_scanned) +
             " records scanned, " + std::to_string(m.dropped_negative_controls) +
             " negative controls)");
  return corpus;
}

std::vector<TruncatedQuestion> build_variants(std::span<const QAExample> examples,
                                              std::span<const int> levels,
                                              CorpusManifest* manifest) {
  std::vector<int> sorted(levels.begin(), levels.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int k : sorted)
    if (k < 0 || k > kMaxLevel)
      fail(ErrorCode::kInvalidArgument, "truncation level " + std::to_string(k) + " outside 0..3");

  std::vector<TruncatedQuestion> out;
  out.reserve(examples.size() * sorted.size());
  for (const auto& ex : examples) {
    for (int k : sorted) {
      try {
        out.push_back({ex.id, k, truncate_words(ex.question, k)});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kTooShort) throw;
        if (manifest) manifest->skipped_too_short.push_back({ex.id, k});
      }
    }
  }
  return out;
}

void write_examples(const std::filesystem::path& path, std::span<const QAExample> examples) {
  std::vector<json> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples)
    rows.push_back({{"id", ex.id}, {"level", 0}, {"text", ex.question},
                    {"reference_answer", ex.reference_answer}});
  io::write_jsonl(path, rows);
}

std::vector<QAExample> read_examples(const std::filesystem::path& path) {
  std::vector<QAExample> out;
  io::for_each_jsonl(path, [&](const json& r, std::size_t line) {
    QAExample ex;
    ex.id = r.at("id").get<std::string>();
    ex.question = r.at("text").get<std::string>();
    ex.reference_answer = r.at("reference_answer").get<std::string>();
    ex.word_count = static_cast<int>(text::word_count(ex.question));
    if (r.at("level").get<int>() != 0 || ex.word_count == 0 || ex.reference_answer.empty())
      fail(ErrorCode::kMalformedRecord,
           path.string() + ":" + std::to_string(line) + ": not a level-0 corpus record");
    out.push_back(std::move(ex));
  });
  return out;
}

void write_variants(const std::filesystem::path& path, std::span<const TruncatedQuestion> variants,
                    std::span<const QAExample> examples) {
  std::map<std::string_view, const QAExample*> by_id;
  for (const auto& ex : examples) by_id[ex.id] = &ex;
  std::vector<json> rows;
  rows.reserve(variants.size());
  for (const auto& v : variants) {
    auto it = by_id.find(v.example_id);
    if (it == by_id.end())
      fail(ErrorCode::kMissingPairing, "variant for unknown example " + v.example_id);
    rows.push_back({{"id", v.example_id}, {"level", v.level}, {"text", v.text},
                    {"reference_answer", it->second->reference_answer}});
  }
  io::write_jsonl(path, rows);
}

std::vector<TruncatedQuestion> read_variants(const std::filesystem::path& path) {
  std::vector<TruncatedQuestion> out;
  io::for_each_jsonl(path, [&](const json& r, std::size_t line) {
    TruncatedQuestion v{r.at("id").get<std::string>(), r.at("level").get<int>(),
                        r.at("text").get<std::string>()};
    if (v.level < 0 || v.level > kMaxLevel || v.text.empty())
      fail(ErrorCode::kMalformedRecord,
           path.string() + ":" + std::to_string(line) + ": invalid variant record");
    out.push_back(std::move(v));
  });
  return out;
}

void write_manifest(const std::filesystem::path& path, const CorpusManifest& m) {
  json skipped = json::array();
  for (const auto& s : m.skipped_too_short) skipped.push_back({{"id", s.id}, {"level", s.level}});
  json j = {{"source_path", m.source_path},
            {"requested_limit", m.requested_limit},
            {"filter_before_limit", m.filter_before_limit},
            {"records_scanned", m.records_scanned},
            {"loaded", m.loaded},
            {"dropped_negative_controls", m.dropped_negative_controls},
            {"skipped_too_short", skipped}};
  io::write_file_atomic(path, j.dump(2) + "\n");
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  json j = json::parse(io::read_file(path));
  CorpusManifest m;
  m.source_path = j.at("source_path").get<std::string>();
  m.requested_limit = j.at("requested_limit").get<int>();
  m.filter_before_limit = j.at("filter_before_limit").get<bool>();
  m.records_scanned = j.at("records_scanned").get<int>();
  m.loaded = j.at("loaded").get<int>();
  m.dropped_negative_controls = j.at("dropped_negative_controls").get<int>();
  for (const auto& s : j.at("skipped_too_short"))
    m.skipped_too_short.push_back({s.at("id").get<std::string>(), s.at("level").get<int>()});
  return m;
}

}  // namespace turnpilot::corpus
