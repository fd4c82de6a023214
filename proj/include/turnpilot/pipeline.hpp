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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "turnpilot/completeness.hpp"
#include "turnpilot/corpus.hpp"
#include "turnpilot/experiment.hpp"
#include "turnpilot/providers.hpp"
#include "turnpilot/turnsim.hpp"

// Run directory stages. Layout:
//   manifest.json  corpus.jsonl  corpus_manifest.json  variants.jsonl
//   responses.jsonl  failures.jsonl  scores.jsonl  labels.jsonl  stats.json
//   figures/*.{csv,json,svg}
namespace turnpilot::pipeline {

namespace fs = std::filesystem;

struct RunPaths {
  fs::path root;

  fs::path manifest() const { return root / "manifest.json"; }
  fs::path corpus() const { return root / "corpus.jsonl"; }
  fs::path corpus_manifest() const { return root / "corpus_manifest.json"; }
  fs::path variants() const { return root / "variants.jsonl"; }
  fs::path responses() const { return root / "responses.jsonl"; }
  fs::path responses_partial() const { return root / "responses.partial.jsonl"; }
  fs::path failures() const { return root / "failures.jsonl"; }
  fs::path scores() const { return root / "scores.jsonl"; }
  fs::path labels() const { return root / "labels.jsonl"; }
  fs::path stats() const { return root / "stats.json"; }
  fs::path figures() const { return root / "figures"; }
};

// Merges `section` into manifest.json under `name` and stamps
// timestamps.<name>. Creates the file when absent.
void update_manifest(const RunPaths& run, const std::string& name, const nlohmann::json& section);
nlohmann::json read_manifest(const RunPaths& run);

// Throws kMissingStageOutput listing every absent file.
void require_files(const std::vector<fs::path>& files);

struct IngestOptions {
  corpus::LoadOptions load;
};
corpus::CorpusManifest ingest(const RunPaths& run, const fs::path& nq_path,
                              const IngestOptions& options);

std::vector<corpus::TruncatedQuestion> truncate(const RunPaths& run, const std::vector<int>& levels);

// Resumable: records already in responses.jsonl or responses.partial.jsonl
// are kept; only missing variants are generated.
experiment::GenerateResult generate(const RunPaths& run, providers::ChatBackend& chat,
                                    const experiment::GenerateOptions& options);

struct ScoreOptions {
  int gold_percentile = 75;
  bool inclusive = false;
  bool score_all = false;  // truncation scores for every example, not just gold
  providers::CallPolicy policy;
};
std::vector<semscore::ScoreRecord> score(const RunPaths& run,
                                         providers::EmbeddingBackend& embedder,
                                         const ScoreOptions& options);

struct AnalyzeOptions {
  int gold_percentile = 75;
  bool inclusive = false;
  bool score_all = false;
  std::optional<double> theta;  // default: the gold threshold
  int histogram_bins = 20;
};
nlohmann::json analyze(const RunPaths& run, const AnalyzeOptions& options);

struct TrainOptions {
  completeness::TrainConfig config;
  bool include_full = true;
  fs::path model_path;      // default: <run>/model.json
  fs::path instances_path;  // default: <run>/instances.jsonl
};
// Builds instances from corpus.jsonl + labels.jsonl, trains on the seeded
// split, evaluates on the rest, saves the model. Returns counts and metrics.
nlohmann::json train(const RunPaths& run, const TrainOptions& options);

struct SimulateOptions {
  std::size_t n_turns = 0;  // 0 = every example
  bool tokens_from_responses = false;
};
// Reads corpus, variants and (when present) labels and responses.
turnsim::ComplianceReport simulate(const RunPaths& run, const turnsim::TurnPolicy& policy,
                                   const turnsim::LatencyProfile& profile,
                                   const SimulateOptions& options);

// Digest over every stage output except the manifest (which carries
// timestamps). Missing files contribute their name only.
std::string run_digest(const RunPaths& run);

// Identifier embedded in manifests and printed by --version.
std::string build_id();

}  // namespace turnpilot::pipeline
