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

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace turnpilot::corpus {

inline constexpr int kMaxLevel = 3;

// One NaturalQuestions question with its annotated long answer (the gold
// reference). word_count is the whitespace token count of `question`.
struct QAExample {
  std::string id;
  std::string question;
  std::string reference_answer;
  int word_count = 0;

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

// `level` words removed from the end of the normalized question.
struct TruncatedQuestion {
  std::string example_id;
  int level = 0;
  std::string text;

  friend bool operator==(const TruncatedQuestion&, const TruncatedQuestion&) = default;
};

struct SkippedVariant {
  std::string id;
  int level = 0;

  friend bool operator==(const SkippedVariant&, const SkippedVariant&) = default;
};

struct CorpusManifest {
  std::string source_path;
  int requested_limit = 0;
  bool filter_before_limit = false;
  int records_scanned = 0;
  int loaded = 0;
  int dropped_negative_controls = 0;
  std::vector<SkippedVariant> skipped_too_short;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

struct LoadOptions {
  int limit = 1000;
  // false: take the first `limit` records, then drop negative controls.
  // true: keep scanning until `limit` usable examples are collected.
  bool filter_before_limit = false;
};

struct Corpus {
  std::vector<QAExample> examples;
  CorpusManifest manifest;
};

// Reads simplified-schema NQ records (one JSON object per line).
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options);

// Collapses whitespace, trims, strips trailing ?.! runs. Case is preserved.
// Throws kEmptyQuestion when nothing is left.
std::string normalize_question(std::string_view raw);

// Drops the final k words. Throws kTooShort unless at least one word remains.
std::string truncate_words(std::string_view question, int k);

// Token span of `document_text` with HTML tags removed, single-space joined.
std::string extract_long_answer(std::string_view document_text, int start_token,
                                int end_token);

// Deterministic order: example order, then ascending level. Each skip is
// appended to manifest->skipped_too_short when a manifest is given.
std::vector<TruncatedQuestion> build_variants(std::span<const QAExample> examples,
                                              std::span<const int> levels,
                                              CorpusManifest* manifest = nullptr);

// corpus.jsonl / variants.jsonl: {id, level, text, reference_answer}.
void write_examples(const std::filesystem::path& path, std::span<const QAExample> examples);
std::vector<QAExample> read_examples(const std::filesystem::path& path);

void write_variants(const std::filesystem::path& path,
                    std::span<const TruncatedQuestion> variants,
                    std::span<const QAExample> examples);
std::vector<TruncatedQuestion> read_variants(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::filesystem::path& path);

}  // namespace turnpilot::corpus
