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
#include <set>

#include "oracles.hpp"
#include "turnpilot/error.hpp"
#include "turnpilot/turnsim.hpp"

using namespace turnpilot;
using namespace turnpilot::turnsim;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

TurnInput input_for(const std::string& id, const std::string& q, std::uint64_t index = 0) {
  TurnInput in;
  in.example_id = id;
  in.question = q;
  in.turn_index = index;
  for (int k = 0; k <= 3; ++k) in.truncations[k] = corpus::truncate_words(q, k);
  return in;
}

// Serial gap with jitter off, written out from the stage definitions.
double serial_oracle(const LatencyProfile& p, int tokens) {
  double llm = p.llm_initial_ms + tokens * p.llm_per_token_ms;
  if (p.llm_worst_case_ms) llm = std::min(llm, *p.llm_worst_case_ms);
  return p.asr_final_ms + llm + p.tts_first_audio_max_ms;
}

std::vector<TurnInput> sample_turns() {
  const std::vector<std::string> qs = {"who sang the theme song for friends",
                                       "what is the tallest mountain on earth",
                                       "when was the eiffel tower built",
                                       "where is the great barrier reef located",
                                       "how many players are on a soccer team",
                                       "who played avatar in the movie"};
  std::vector<TurnInput> out;
  for (std::size_t i = 0; i < qs.size(); ++i) out.push_back(input_for("t" + std::to_string(i), qs[i], i));
  return out;
}

}  // namespace

TEST_CASE("syllable estimate and utterance duration") {
  auto p = builtin_profile("paper-groq");
  CHECK(estimate_syllables("who") == 1);
  CHECK(estimate_syllables("avatar") == 3);
  CHECK(estimate_syllables("") == 0);
  CHECK(estimate_syllables("rhythm") == 1);
  CHECK(estimate_syllables("who is the") == 3);
  CHECK(estimate_syllables("who played avatar") == tpt::oracle_syllables("who played avatar"));
  // 8 syllables at 4 per second.
  CHECK(utterance_duration_ms("who played avatar in the film", p) == 8 * 250.0);
  CHECK(utterance_duration_ms("who", p) == 250.0);
  CHECK(code_of([&] { utterance_duration_ms("  ", p); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("builtin profiles") {
  CHECK(builtin_profile_names() == std::vector<std::string>{"paper-groq", "paper-slow", "paper-azure-asr"});
  auto g = builtin_profile("paper-groq");
  CHECK(g.asr_ms() == 650.0);
  CHECK(builtin_profile("paper-azure-asr").asr_ms() == 500.0);
  CHECK(code_of([] { builtin_profile("nope"); }) == ErrorCode::kConfig);
}

TEST_CASE("serial gaps") {
  auto in = input_for("a", "who sang the theme song");
  auto groq = builtin_profile("paper-groq");
  auto slow = builtin_profile("paper-slow");
  CHECK(simulate_turn(in, SerialPolicy{}, groq).gap_ms == 1000.0);
  CHECK(simulate_turn(in, SerialPolicy{}, slow).gap_ms == 1400.0);
  CHECK(serial_oracle(groq, 60) == 1000.0);
  in.response_tokens = 12;
  CHECK(simulate_turn(in, SerialPolicy{}, groq).gap_ms == doctest::Approx(serial_oracle(groq, 12)));
  auto uncapped = groq;
  uncapped.llm_worst_case_ms.reset();
  in.response_tokens = 240;
  CHECK(simulate_turn(in, SerialPolicy{}, uncapped).gap_ms == doctest::Approx(650 + 1000 + 100));
}

TEST_CASE("eager: spoken tail is credited against the pipeline") {
  auto p = builtin_profile("paper-groq");
  // Last two words carry 4 syllables: 1000 ms of credit against 1000 ms.
  auto in = input_for("a", "what about banana split");
  auto o = simulate_turn(in, EagerPolicy{2}, p);
  CHECK(o.gap_ms == 1000.0 - 1000.0);
  CHECK(o.answered_from_prefix);
  CHECK(o.truncation_level == 2);
  in.labels[2] = experiment::Label::kLateInformative;
  CHECK(simulate_turn(in, EagerPolicy{2}, p).quality_label == experiment::Label::kLateInformative);

  TurnInput missing = in;
  missing.truncations.erase(3);
  CHECK(code_of([&] { simulate_turn(missing, EagerPolicy{3}, p); }) == ErrorCode::kMissingTruncation);
  CHECK(code_of([&] { simulate_turn(in, EagerPolicy{4}, p); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("fraction_in_window") {
  auto p = builtin_profile("paper-groq");
  auto turns = sample_turns();

  auto serial = run_policy(turns, SerialPolicy{}, p);
  CHECK(serial.turns == turns.size());
  CHECK(serial.fraction_in_window == 0.0);
  CHECK(serial.mean_gap_ms == 1000.0);
  CHECK(serial.sd_gap_ms == 0.0);

  for (int k = 1; k <= 3; ++k) {
    auto eager = run_policy(turns, EagerPolicy{k}, p);
    std::size_t inside = 0;
    std::vector<double> gaps;
    for (const auto& t : turns) {
      auto w = tpt::words_of(t.question);
      std::string tail;
      for (std::size_t i = w.size() - static_cast<std::size_t>(k); i < w.size(); ++i) tail += w[i] + " ";
      const double gap = 1000.0 - tpt::oracle_syllables(tail) / 4.0 * 1000.0;
      gaps.push_back(gap);
      inside += gap >= -280.0 && gap <= 758.0;
    }
    CHECK(eager.fraction_in_window == static_cast<double>(inside) / static_cast<double>(turns.size()));
    CHECK(eager.mean_gap_ms == doctest::Approx(tpt::oracle_mean(gaps)));
    CHECK(eager.prefix_answer_rate == 1.0);
  }
}

TEST_CASE("filler policy") {
  auto p = builtin_profile("paper-groq");
  auto turns = sample_turns();
  completeness::CompletenessModel never;
  never.bias = -50.0;
  FillerPolicy f{&never, 0.8, 100.0, 0, nullptr};
  auto r = run_policy(turns, f, p);
  CHECK(r.filler_rate == 1.0);
  CHECK(r.mean_gap_ms == 100.0);
  CHECK(r.fraction_in_window == 1.0);
  CHECK(r.outcomes[0].completion_ms == 1000.0);
  CHECK_FALSE(r.outcomes[0].filler_text.empty());

  // A model sure of everything fires on the first word.
  completeness::CompletenessModel always;
  always.bias = 50.0;
  FillerPolicy eager_like{&always, 0.8, 100.0, 0, nullptr};
  auto in = input_for("a", "who sang the theme song");
  auto o = simulate_turn(in, eager_like, p);
  CHECK(o.answered_from_prefix);
  CHECK(o.truncation_level == 4);
  CHECK(o.gap_ms == 1000.0 - estimate_syllables("sang the theme song") * 250.0);

  FillerPolicy no_model{nullptr, 0.8, 100.0, 0, nullptr};
  CHECK(code_of([&] { run_policy(turns, no_model, p); }) == ErrorCode::kMissingModel);
}

TEST_CASE("run_policy collects per-turn errors") {
  auto p = builtin_profile("paper-groq");
  auto turns = sample_turns();
  turns[1].truncations.erase(2);
  auto r = run_policy(turns, EagerPolicy{2}, p);
  CHECK(r.turns == turns.size() - 1);
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].find("t1") != std::string::npos);
}

TEST_CASE("expected quality loss and report serialization") {
  auto p = builtin_profile("paper-groq");
  auto turns = sample_turns();
  turns[0].labels[1] = experiment::Label::kLateInformative;
  turns[1].labels[1] = experiment::Label::kLateUninformative;
  auto r = run_policy(turns, EagerPolicy{1}, p);
  CHECK(r.expected_quality_loss == doctest::Approx(1.0 / 6.0));
  auto j = to_json(r);
  CHECK(j["policy"] == "eager:1");
  CHECK(j["labeled_prefix_answers"] == 2);
  CHECK(j["turns"] == turns.size());
  CHECK(j["outcomes"].is_array());
  CHECK_FALSE(to_json(r, false).contains("outcomes"));
  auto csv = turns_csv(r);
  CHECK(csv.rfind("example_id,policy,gap_ms,used_filler,answered_from_prefix,label\n", 0) == 0);
  CHECK(tpt::lines_of(csv).size() == 1 + turns.size());
}

TEST_CASE("choose_filler") {
  auto t = parse_filler_templates("how | H1\nhow | H2\ngeneric | G\n# comment\n");
  CHECK(t.classes.at("how").size() == 2);
  auto h = choose_filler("so how do", t, 3);
  CHECK((h == "H1" || h == "H2"));
  CHECK(choose_filler("so how do", t, 3) == h);
  CHECK(choose_filler("tell me", t, 3) == "G");
  CHECK(choose_filler("why is it", t, 3) == "G");  // class without phrases
  FillerTemplates empty;
  CHECK(code_of([&] { choose_filler("x", empty, 0); }) == ErrorCode::kConfig);
  CHECK(default_filler_templates().classes.count("generic") == 1);

  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 32; ++s) seen.insert(choose_filler("how far", t, s));
  CHECK(seen.size() == 2);
}

TEST_CASE("profile files") {
  auto p = parse_profile("base = \"paper-slow\"\nname = \"mine\"\ntts_first_audio_ms = [80, 120]\nllm_worst_case_ms = \"none\"\n");
  CHECK(p.name == "mine");
  CHECK(p.llm_per_token_ms == 94.0);
  CHECK(p.tts_first_audio_max_ms == 120.0);
  CHECK_FALSE(p.llm_worst_case_ms.has_value());
  CHECK(parse_profile(format_profile(p)) == p);
  for (const auto& name : builtin_profile_names()) {
    auto b = builtin_profile(name);
    CHECK(parse_profile(format_profile(b)) == b);
  }

  try {
    parse_profile("name = \"x\"\n\nbogus_key = 3\n", "p.toml");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK(std::string(e.what()).find("p.toml:3") != std::string::npos);
  }
  CHECK(code_of([] { parse_profile("speaking_rate_syll_per_s = 0\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_profile("tts_first_audio_ms = [200, 100]\n"); }) == ErrorCode::kConfig);

  tpt::TempDir dir;
  tpt::write_text(dir / "p.toml", format_profile(p));
  CHECK(load_profile(dir / "p.toml") == p);
}

TEST_CASE("jitter") {
  auto p = builtin_profile("paper-groq");
  p.jitter = {true, 0.2, 99};
  auto a = pipeline_latency(p, 60, 5);
  auto b = pipeline_latency(p, 60, 5);
  CHECK(a.total() == b.total());
  CHECK(pipeline_latency(p, 60, 6).total() != a.total());
  CHECK(a.tts_ms > 0.0);

  auto other = p;
  other.jitter.seed = 100;
  CHECK(pipeline_latency(other, 60, 5).total() != a.total());

  // Median multiplier 1: roughly half of a long stream lands above serial.
  std::size_t above = 0;
  auto off = p;
  off.jitter.enabled = false;
  const double serial = pipeline_latency(off, 60, 0).asr_ms;
  for (std::uint64_t i = 0; i < 2000; ++i) above += pipeline_latency(p, 60, i).asr_ms > serial;
  CHECK(above > 900);
  CHECK(above < 1100);
}

TEST_CASE("shifting a stage shifts every serial gap by the same amount") {
  auto p = builtin_profile("paper-groq");
  p.llm_worst_case_ms.reset();
  auto q = p;
  q.llm_initial_ms += 123.0;
  auto turns = sample_turns();
  auto a = run_policy(turns, SerialPolicy{}, p);
  auto b = run_policy(turns, SerialPolicy{}, q);
  for (std::size_t i = 0; i < turns.size(); ++i)
    CHECK(b.outcomes[i].gap_ms - a.outcomes[i].gap_ms == doctest::Approx(123.0));
}

TEST_CASE("human norms") {
  CHECK(HumanLatencyNorms::kMeanGapMs == 239.0);
  CHECK(HumanLatencyNorms::kSdGapMs == 519.0);
  CHECK(HumanLatencyNorms::in_window(-280.0));
  CHECK(HumanLatencyNorms::in_window(758.0));
  CHECK_FALSE(HumanLatencyNorms::in_window(758.5));
  CHECK_FALSE(HumanLatencyNorms::in_window(-281.0));
}

TEST_CASE("make_turn_inputs") {
  std::vector<corpus::QAExample> ex{{"a", "who wrote the play", "r", 4}, {"b", "what is it now", "r", 4}};
  auto variants = corpus::build_variants(ex, std::vector<int>{0, 1, 2, 3});
  std::vector<experiment::ResponseRecord> res{{"a", 0, "x", 17}};
  std::vector<experiment::TruncationLabel> labels{{"a", 2, 0.1, experiment::Label::kLateInformative}};
  auto p = builtin_profile("paper-groq");
  auto in = make_turn_inputs(ex, variants, labels, res, p);
  REQUIRE(in.size() == 2);
  CHECK(in[0].response_tokens == 60);
  CHECK(in[0].truncations.at(2) == "who wrote");
  CHECK(in[0].labels.at(2) == experiment::Label::kLateInformative);
  CHECK(in[1].turn_index == 1);
  CHECK(make_turn_inputs(ex, variants, labels, res, p, 1).size() == 1);
  auto measured = make_turn_inputs(ex, variants, labels, res, p, 0, true);
  CHECK(measured[0].response_tokens == 17);
  CHECK(measured[1].response_tokens == 60);
}
