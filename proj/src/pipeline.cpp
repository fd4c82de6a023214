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

#include "turnpilot/pipeline.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <mutex>
#include <tuple>

#include "turnpilot/error.hpp"
#include "turnpilot/hash.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/log.hpp"
#include "turnpilot/semscore.hpp"

#ifndef TURNPILOT_VERSION
#define TURNPILOT_VERSION "0.0.0"
#endif

namespace turnpilot::pipeline {

using nlohmann::json;

namespace {

std::string utc_now_iso() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json summary_json(const semscore::SummaryStats& s) {
  json pct = json::object();
  for (const auto& [p, v] : s.percentiles) pct[std::to_string(p)] = v;
  return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}, {"percentiles", pct}};
}

json box_json(const semscore::BoxWhisker& b) {
  return {{"q1", b.q1},
          {"median", b.median},
          {"q3", b.q3},
          {"whisker_low", b.whisker_low},
          {"whisker_high", b.whisker_high},
          {"outliers", b.outliers}};
}

const int kReportPercentiles[] = {25, 50, 75};

}  // namespace

std::string build_id() { return std::string("turnpilot/") + TURNPILOT_VERSION; }

json read_manifest(const RunPaths& run) {
  if (!fs::exists(run.manifest())) return json::object();
  return json::parse(io::read_file(run.manifest()));
}

void update_manifest(const RunPaths& run, const std::string& name, const json& section) {
  json m = read_manifest(run);
  m["build_id"] = build_id();
  m["hash"] = {{"algorithm", kHashAlgorithm}, {"seed", hex64(kHashSeed)}};
  m[name] = section;
  m["timestamps"][name] = utc_now_iso();
  io::write_file_atomic(run.manifest(), m.dump(2) + "\n");
}

void require_files(const std::vector<fs::path>& files) {
  std::string missing;
  for (const auto& f : files)
    if (!fs::exists(f)) missing += (missing.empty() ? "" : ", ") + f.string();
  if (!missing.empty()) fail(ErrorCode::kMissingStageOutput, "missing stage outputs: " + missing);
}

corpus::CorpusManifest ingest(const RunPaths& run, const fs::path& nq_path, const IngestOptions& options) {
  auto loaded = corpus::load_corpus(nq_path, options.load);
  fs::create_directories(run.root);
  corpus::write_examples(run.corpus(), loaded.examples);
  corpus::write_manifest(run.corpus_manifest(), loaded.manifest);
  const auto& m = loaded.manifest;
  update_manifest(run, "corpus",
                  {{"source_path", m.source_path},
                   {"digest", digest128(io::read_file(run.corpus()))},
                   {"requested_limit", m.requested_limit},
                   {"filter_before_limit", m.filter_before_limit},
                   {"records_scanned", m.records_scanned},
                   {"loaded", m.loaded},
                   {"dropped_negative_controls", m.dropped_negative_controls}});
  return m;
}

std::vector<corpus::TruncatedQuestion> truncate(const RunPaths& run, const std::vector<int>& levels) {
  require_files({run.corpus(), run.corpus_manifest()});
  auto examples = corpus::read_examples(run.corpus());
  auto manifest = corpus::read_manifest(run.corpus_manifest());
  manifest.skipped_too_short.clear();
  auto variants = corpus::build_variants(examples, levels, &manifest);
  corpus::write_variants(run.variants(), variants, examples);
  corpus::write_manifest(run.corpus_manifest(), manifest);
  json skipped = json::array();
  for (const auto& s : manifest.skipped_too_short) skipped.push_back({{"id", s.id}, {"level", s.level}});
  update_manifest(run, "truncate", {{"levels", levels}, {"variants", variants.size()}, {"skipped_too_short", skipped}});
  return variants;
}

experiment::GenerateResult generate(const RunPaths& run, providers::ChatBackend& chat,
                                    const experiment::GenerateOptions& options) {
  require_files({run.variants()});
  auto variants = corpus::read_variants(run.variants());

  std::vector<experiment::ResponseRecord> existing;
  if (fs::exists(run.responses())) existing = experiment::read_responses(run.responses());
  if (fs::exists(run.responses_partial())) {
    // A torn final line from an interrupted run is dropped, not fatal.
    std::ifstream in(run.responses_partial());
    std::string line;
    while (std::getline(in, line)) {
      try {
        existing.push_back(experiment::response_from_json(json::parse(line)));
      } catch (const std::exception&) {
        log::warn("ignoring unreadable line in " + run.responses_partial().string());
      }
    }
  }

  std::ofstream partial(run.responses_partial(), std::ios::app);
  if (!partial) fail(ErrorCode::kIo, "cannot open " + run.responses_partial().string());
  std::vector<experiment::GenerationFailure> failures;
  experiment::GenerateOptions opts = options;
  opts.on_record = [&](const experiment::ResponseRecord& r) {
    partial << io::canonical(experiment::to_json(r)) << '\n';
    partial.flush();
    if (options.on_record) options.on_record(r);
  };
  opts.on_failure = [&](const experiment::GenerationFailure& f) {
    failures.push_back(f);
    if (options.on_failure) options.on_failure(f);
  };

  auto write_failures = [&] {
    std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) {
      return std::tie(a.example_id, a.level) < std::tie(b.example_id, b.level);
    });
    std::vector<json> rows;
    for (const auto& f : failures)
      rows.push_back({{"example_id", f.example_id}, {"level", f.level}, {"message", f.message}});
    io::write_jsonl(run.failures(), rows);
  };

  experiment::GenerateResult result;
  try {
    result = experiment::generate_responses(variants, chat, opts, existing);
  } catch (const Error& e) {
    partial.close();
    write_failures();
    throw;
  }
  partial.close();
  experiment::write_responses(run.responses(), result.records);
  write_failures();
  fs::remove(run.responses_partial());

  update_manifest(run, "generation",
                  {{"provider_id", chat.provider_id()},
                   {"model_id", options.model_id},
                   {"temperature", options.temperature},
                   {"max_tokens", options.max_tokens},
                   {"system_preamble", nullptr},
                   {"prompt", "question text verbatim as the single user message"},
                   {"parallelism", options.parallelism},
                   {"failure_ceiling", options.failure_ceiling},
                   {"records", result.records.size()},
                   {"failures", result.failures.size()},
                   {"generated_this_run", result.generated},
                   {"reused", result.reused}});
  return result;
}

std::vector<semscore::ScoreRecord> score(const RunPaths& run, providers::EmbeddingBackend& embedder,
                                         const ScoreOptions& options) {
  require_files({run.corpus(), run.responses()});
  auto examples = corpus::read_examples(run.corpus());
  auto responses = experiment::read_responses(run.responses());

  auto scores = experiment::score_reference(responses, examples, embedder, options.policy);
  if (scores.empty()) fail(ErrorCode::kEmptyInput, "no res-0 responses to score");
  auto gold = experiment::select_gold_subset(scores, options.gold_percentile, options.inclusive);
  auto trunc = experiment::score_truncation(responses, options.score_all ? nullptr : &gold.ids,
                                            embedder, options.policy);
  scores.insert(scores.end(), trunc.scores.begin(), trunc.scores.end());
  experiment::write_scores(run.scores(), scores);

  update_manifest(run, "scoring",
                  {{"embedder_provider", embedder.provider_id()},
                   {"embedder_model", embedder.model_id()},
                   {"gold_percentile", options.gold_percentile},
                   {"inclusive", options.inclusive},
                   {"score_all", options.score_all},
                   {"gold_threshold", gold.threshold},
                   {"scores", scores.size()},
                   {"omissions", trunc.omissions}});
  return scores;
}

json analyze(const RunPaths& run, const AnalyzeOptions& options) {
  require_files({run.scores()});
  auto scores = experiment::read_scores(run.scores());

  std::vector<semscore::ScoreRecord> reference;
  for (const auto& s : scores)
    if (s.comparison == semscore::Comparison::kRefVsRes0) reference.push_back(s);
  if (reference.empty()) fail(ErrorCode::kEmptyInput, "scores.jsonl holds no ref_vs_res0 scores");

  auto gold = experiment::select_gold_subset(reference, options.gold_percentile, options.inclusive);
  const double theta = options.theta.value_or(gold.threshold);

  std::vector<semscore::ScoreRecord> truncation;
  for (const auto& s : scores)
    if (s.comparison != semscore::Comparison::kRefVsRes0 && (options.score_all || gold.ids.count(s.example_id)))
      truncation.push_back(s);
  auto labels = experiment::label_examples(truncation, theta);
  experiment::write_labels(run.labels(), labels);

  const std::size_t total = options.score_all ? reference.size() : gold.ids.size();
  auto retained = experiment::count_retained(labels, total);

  std::vector<double> ref_values;
  for (const auto& s : reference) ref_values.push_back(s.value);
  json stats;
  stats["ref_vs_res0"] = summary_json(semscore::summarize(ref_values, kReportPercentiles));
  stats["ref_vs_res0"]["box"] = box_json(semscore::box_whisker(ref_values));
  auto hist = semscore::histogram(ref_values, options.histogram_bins, 0.0, 1.0);
  json counts = json::array();
  for (const auto& b : hist.bins) counts.push_back(b.count);
  stats["histogram"] = {{"bins", options.histogram_bins}, {"lo", 0.0}, {"hi", 1.0},
                        {"counts", counts}, {"below", hist.below}, {"above", hist.above}};
  stats["gold"] = {{"percentile", options.gold_percentile},
                   {"threshold", gold.threshold},
                   {"count", gold.ids.size()},
                   {"inclusive", options.inclusive}};
  stats["theta"] = theta;
  stats["score_all"] = options.score_all;

  stats["truncation"] = json::object();
  std::map<int, std::size_t> scored;
  for (int level = 1; level <= corpus::kMaxLevel; ++level) {
    std::vector<double> values;
    for (const auto& s : truncation)
      if (semscore::comparison_level(s.comparison) == level) values.push_back(s.value);
    scored[level] = values.size();
    const std::string tag(semscore::to_string(semscore::truncation_comparison(level)));
    if (values.empty()) {
      stats["truncation"][tag] = nullptr;
      continue;
    }
    stats["truncation"][tag] = summary_json(semscore::summarize(values, kReportPercentiles));
    stats["truncation"][tag]["box"] = box_json(semscore::box_whisker(values));
  }
  stats["retained"] = json::object();
  for (const auto& [level, r] : retained)
    stats["retained"][std::to_string(level)] = {{"count", r.count},
                                                {"fraction", r.fraction},
                                                {"total", total},
                                                {"scored", scored[level]},
                                                {"late_informative", scored[level] - r.count}};

  io::write_file_atomic(run.stats(), stats.dump(2) + "\n");
  update_manifest(run, "analysis",
                  {{"gold_percentile", options.gold_percentile},
                   {"inclusive", options.inclusive},
                   {"score_all", options.score_all},
                   {"theta", theta},
                   {"theta_source", options.theta ? "flag" : "gold_threshold"},
                   {"histogram_bins", options.histogram_bins}});
  return stats;
}

json train(const RunPaths& run, const TrainOptions& options) {
  require_files({run.corpus(), run.labels()});
  completeness::validate(options.config);
  const auto examples = corpus::read_examples(run.corpus());
  const auto labels = experiment::read_labels(run.labels());
  const auto data = completeness::build_training_set(examples, labels, options.include_full);
  const fs::path instances_path = options.instances_path.empty() ? run.root / "instances.jsonl" : options.instances_path;
  completeness::write_instances(instances_path, data);

  auto [train_set, test_set] = completeness::split(data, options.config);
  auto model = completeness::train(train_set, options.config);
  const json manifest = read_manifest(run);
  model.provenance.theta = manifest.contains("analysis") ? manifest["analysis"].value("theta", 0.0) : 0.0;
  model.provenance.run_id = run_digest(run);
  const fs::path model_path = options.model_path.empty() ? run.root / "model.json" : options.model_path;
  completeness::save_model(model_path, model);

  std::size_t positives = 0;
  for (const auto& in : data) positives += in.label == 1;
  json metrics = nullptr;
  if (!test_set.empty()) {
    const auto m = completeness::evaluate(model, test_set);
    metrics = {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
               {"auc", m.auc ? json(*m.auc) : json(nullptr)}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
  }
  json out = {{"instances", data.size()},
              {"class_1", positives},
              {"class_0", data.size() - positives},
              {"train", train_set.size()},
              {"test", test_set.size()},
              {"model", model_path.string()},
              {"config_digest", model.config_digest},
              {"metrics", metrics}};
  update_manifest(run, "train",
                  {{"learning_rate", options.config.learning_rate},
                   {"l2", options.config.l2},
                   {"epochs", options.config.epochs},
                   {"batch_size", options.config.batch_size},
                   {"seed", options.config.seed},
                   {"split", options.config.split},
                   {"include_full", options.include_full},
                   {"config_digest", model.config_digest},
                   {"model", model_path.string()}});
  return out;
}

turnsim::ComplianceReport simulate(const RunPaths& run, const turnsim::TurnPolicy& policy,
                                   const turnsim::LatencyProfile& profile, const SimulateOptions& options) {
  require_files({run.corpus(), run.variants()});
  const auto examples = corpus::read_examples(run.corpus());
  const auto variants = corpus::read_variants(run.variants());
  std::vector<experiment::TruncationLabel> labels;
  if (fs::exists(run.labels())) labels = experiment::read_labels(run.labels());
  std::vector<experiment::ResponseRecord> responses;
  if (options.tokens_from_responses) {
    require_files({run.responses()});
    responses = experiment::read_responses(run.responses());
  }
  const auto turns = turnsim::make_turn_inputs(examples, variants, labels, responses, profile, options.n_turns,
                                               options.tokens_from_responses);
  return turnsim::run_policy(turns, policy, profile);
}

std::string run_digest(const RunPaths& run) {
  std::string buffer;
  for (const fs::path& f : {run.corpus(), run.variants(), run.responses(), run.failures(), run.scores(),
                            run.labels(), run.stats()}) {
    buffer += f.filename().string();
    buffer += '\0';
    if (fs::exists(f)) buffer += io::read_file(f);
    buffer += '\0';
  }
  return digest128(buffer);
}

}  // namespace turnpilot::pipeline
