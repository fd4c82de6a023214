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

#include <doctest.h>

#include <functional>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "turnpilot/error.hpp"
#include "turnpilot/pipeline.hpp"
#include "turnpilot/report.hpp"

using namespace turnpilot;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = TP_DATA_DIR;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

struct FixtureRun {
  tpt::TempDir dir;
  pipeline::RunPaths run{dir.path()};
  providers::MockChatBackend chat =
      providers::MockChatBackend::from_recording(kData / "fixtures" / "recorded_responses.jsonl");
  providers::HashedBagEmbedder embedder;

  void through_generate() {
    pipeline::IngestOptions in;
    in.load.limit = 1000;
    pipeline::ingest(run, kData / "fixtures" / "nq_fixture.jsonl", in);
    pipeline::truncate(run, {0, 1, 2, 3});
    pipeline::generate(run, chat, {});
  }
  void through_analyze() {
    through_generate();
    pipeline::score(run, embedder, {});
    pipeline::analyze(run, {});
  }
};

}  // namespace

TEST_CASE("fixture run: every stage writes its outputs") {
  FixtureRun f;
  f.through_analyze();
  for (const auto& p : {f.run.corpus(), f.run.corpus_manifest(), f.run.variants(), f.run.responses(),
                        f.run.scores(), f.run.labels(), f.run.stats(), f.run.manifest()})
    CHECK_MESSAGE(fs::exists(p), p.string());
  CHECK_FALSE(fs::exists(f.run.responses_partial()));

  auto manifest = pipeline::read_manifest(f.run);
  for (const char* section : {"corpus", "truncate", "generation", "scoring", "analysis"}) {
    CHECK_MESSAGE(manifest.contains(section), section);
    CHECK(manifest["timestamps"].contains(section));
  }
  CHECK(manifest["generation"]["system_preamble"].is_null());
  CHECK(manifest["generation"]["temperature"] == 0.0);

  auto stats = json::parse(tpt::read_text(f.run.stats()));
  CHECK(stats["gold"]["count"].get<int>() > 0);
  for (const char* level : {"1", "2", "3"}) CHECK(stats["retained"].contains(level));
  CHECK(stats["retained"]["1"]["count"].get<int>() >= stats["retained"]["3"]["count"].get<int>());
}

TEST_CASE("generate resumes from a partial log") {
  FixtureRun f;
  f.through_generate();
  const auto full = tpt::read_text(f.run.responses());
  const auto calls = f.chat.invocations();

  // Crash simulation: drop responses.jsonl, leave a partial log with half.
  auto lines = tpt::lines_of(full);
  std::string half;
  for (std::size_t i = 0; i < lines.size(); i += 2) half += lines[i] + "\n";
  fs::remove(f.run.responses());
  tpt::write_text(f.run.responses_partial(), half);

  auto r = pipeline::generate(f.run, f.chat, {});
  CHECK(r.reused == (lines.size() + 1) / 2);
  CHECK(f.chat.invocations() - calls == lines.size() / 2);
  CHECK(tpt::read_text(f.run.responses()) == full);
  CHECK_FALSE(fs::exists(f.run.responses_partial()));
}

TEST_CASE("digest is stable across identical runs") {
  FixtureRun a, b;
  a.through_analyze();
  b.through_analyze();
  CHECK(pipeline::run_digest(a.run) == pipeline::run_digest(b.run));
  tpt::write_text(b.run.stats(), "{}");
  CHECK(pipeline::run_digest(a.run) != pipeline::run_digest(b.run));
}

TEST_CASE("stages refuse to run without their inputs") {
  tpt::TempDir dir;
  pipeline::RunPaths run{dir.path()};
  providers::HashedBagEmbedder e;
  providers::MockChatBackend chat({}, true);
  CHECK(code_of([&] { pipeline::truncate(run, {0, 1}); }) == ErrorCode::kMissingStageOutput);
  CHECK(code_of([&] { pipeline::generate(run, chat, {}); }) == ErrorCode::kMissingStageOutput);
  CHECK(code_of([&] { pipeline::score(run, e, {}); }) == ErrorCode::kMissingStageOutput);
  CHECK(code_of([&] { pipeline::analyze(run, {}); }) == ErrorCode::kMissingStageOutput);
  CHECK(code_of([&] { report::emit_report(run, report::Format::kCsv); }) == ErrorCode::kMissingStageOutput);
  try {
    pipeline::analyze(run, {});
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("scores.jsonl") != std::string::npos);
  }
}

TEST_CASE("analyze: theta override and score_all") {
  FixtureRun f;
  f.through_generate();
  pipeline::ScoreOptions so;
  so.score_all = true;
  pipeline::score(f.run, f.embedder, so);

  pipeline::AnalyzeOptions ao;
  ao.theta = 1.0;
  auto stats = pipeline::analyze(f.run, ao);
  // Only exact-duplicate answers reach a similarity of 1.
  auto labels = experiment::read_labels(f.run.labels());
  for (const auto& l : labels)
    if (l.label == experiment::Label::kLateUninformative) CHECK(l.similarity_to_res0 >= 1.0);

  ao.theta.reset();
  ao.score_all = true;
  auto all = pipeline::analyze(f.run, ao);
  CHECK(experiment::read_labels(f.run.labels()).size() > labels.size());
  CHECK(all["retained"]["1"]["total"].get<int>() == 50);
}

TEST_CASE("report writes the three figures in each format") {
  FixtureRun f;
  f.through_analyze();
  for (auto [fmt, ext] : {std::pair{report::Format::kCsv, ".csv"}, std::pair{report::Format::kJson, ".json"},
                          std::pair{report::Format::kSvg, ".svg"}}) {
    auto paths = report::emit_report(f.run, fmt, 10);
    REQUIRE(paths.size() == 3);
    for (const auto& p : paths) {
      CHECK(fs::exists(p));
      CHECK(p.extension() == ext);
    }
  }
  auto hist = tpt::lines_of(tpt::read_text(f.run.figures() / "fig1_histogram.csv"));
  CHECK(hist[0] == "bin_lo,bin_hi,count");
  CHECK(hist.size() == 1 + 10);
  auto retained = tpt::lines_of(tpt::read_text(f.run.figures() / "fig3_retained.csv"));
  CHECK(retained[0] == "level,count,fraction,total");
  CHECK(retained.size() == 4);
  CHECK(tpt::read_text(f.run.figures() / "fig2_box.svg").find("<svg") != std::string::npos);
  CHECK(code_of([] { report::format_from_string("pdf"); }) != ErrorCode::kOk);
}

TEST_CASE("train and simulate from a run directory") {
  FixtureRun f;
  f.through_analyze();
  pipeline::TrainOptions to;
  auto t = pipeline::train(f.run, to);
  CHECK(t["instances"].get<int>() > 0);
  CHECK(fs::exists(f.run.root / "model.json"));
  CHECK(fs::exists(f.run.root / "instances.jsonl"));
  auto model = completeness::load_model(f.run.root / "model.json");
  CHECK(model.provenance.run_id == pipeline::run_digest(f.run));

  auto profile = turnsim::builtin_profile("paper-groq");
  auto serial = pipeline::simulate(f.run, turnsim::SerialPolicy{}, profile, {});
  CHECK(serial.turns == 50);
  CHECK(serial.fraction_in_window == 0.0);
  auto eager = pipeline::simulate(f.run, turnsim::EagerPolicy{2}, profile, {});
  CHECK(eager.fraction_in_window > serial.fraction_in_window);
  pipeline::SimulateOptions so;
  so.n_turns = 5;
  so.tokens_from_responses = true;
  CHECK(pipeline::simulate(f.run, turnsim::FillerPolicy{&model}, profile, so).turns == 5);
}
