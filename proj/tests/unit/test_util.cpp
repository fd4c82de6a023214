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

#include <set>
#include <thread>

#include "oracles.hpp"
#include "turnpilot/error.hpp"
#include "turnpilot/hash.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/kv_config.hpp"
#include "turnpilot/text.hpp"

using namespace turnpilot;

TEST_CASE("fnv1a64 matches published vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("mix64 is the splitmix64 finalizer") {
  // First splitmix64 output from state 0.
  CHECK(mix64(0x9e3779b97f4a7c15ULL) == 0xe220a8397b1dcdafULL);
  CHECK(mix64(0) == 0);
}

TEST_CASE("digest128 is 32 hex chars and input sensitive") {
  const auto a = digest128("abc");
  CHECK(a.size() == 32);
  CHECK(a.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(a == digest128("abc"));
  CHECK(a != digest128("abd"));
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("split_words and alnum_tokens") {
  auto w = text::split_words("  who \t sang\nthe  ");
  REQUIRE(w.size() == 3);
  CHECK(w[2] == "the");
  CHECK(text::word_count("") == 0);
  auto t = text::alnum_tokens("Hello, WORLD! it's 42");
  CHECK(t == std::vector<std::string>{"hello", "world", "it", "s", "42"});
  CHECK(text::trim("  x y \n") == "x y");
}

TEST_CASE("kv parse: sections, types, arrays") {
  auto e = kv::parse("# c\ntop = 1\n[sim]\nprofile = \"paper-groq\" # trailing\njitter = true\nrange = [80, 100]\n");
  REQUIRE(e.size() == 4);
  CHECK(e[0].key == "top");
  CHECK(e[1].key == "sim.profile");
  CHECK(std::get<std::string>(e[1].value.data) == "paper-groq");
  CHECK(e[1].line == 4);
  CHECK(std::get<bool>(e[2].value.data));
  CHECK(std::get<kv::Array>(e[3].value.data).size() == 2);
  CHECK(kv::to_string(e[3].value) == "80,100");
}

TEST_CASE("kv parse errors carry origin and line") {
  try {
    kv::parse("a = 1\n\nb = \n", "cfg.toml");
    FAIL("expected a parse error");
  } catch (const kv::ParseError& err) {
    CHECK(err.line() == 3);
    CHECK(std::string(err.what()).rfind("cfg.toml:3:", 0) == 0);
  }
  CHECK_THROWS_AS(kv::parse("[s]\nx = 1\nx = 2\n"), kv::ParseError);
  CHECK_THROWS_AS(kv::parse("[broken\n"), kv::ParseError);
  CHECK_THROWS_AS(kv::parse("just words\n"), kv::ParseError);
}

TEST_CASE("jsonl reader reports the malformed line") {
  tpt::TempDir dir;
  tpt::write_text(dir / "x.jsonl", "{\"a\":1}\n\n{\"a\":\n");
  int seen = 0;
  try {
    io::for_each_jsonl(dir / "x.jsonl", [&](const nlohmann::json&, std::size_t) { ++seen; });
    FAIL("expected malformed record");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMalformedRecord);
    CHECK(std::string(e.what()).find("x.jsonl:3") != std::string::npos);
  }
  CHECK(seen == 1);
}

TEST_CASE("atomic writes from many threads leave one complete file") {
  tpt::TempDir dir;
  const auto target = dir / "f.txt";
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 20; ++i) io::write_file_atomic(target, std::string(1000, static_cast<char>('a' + t)));
    });
  for (auto& th : threads) th.join();
  const auto body = tpt::read_text(target);
  REQUIRE(body.size() == 1000);
  CHECK(std::set<char>(body.begin(), body.end()).size() == 1);
  std::size_t leftovers = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) leftovers += e.path() != target;
  CHECK(leftovers == 0);
}

TEST_CASE("error code names") {
  CHECK(error_code_name(ErrorCode::kTooShort) == "TooShort");
  CHECK(error_code_name(ErrorCode::kZeroUsableExamples) == "ZeroUsableExamples");
}
