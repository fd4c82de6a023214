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

#include <sys/wait.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "oracles.hpp"

// Runs the turnpilot executable through /bin/sh and captures its streams.
namespace tpt {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

// `env` entries are NAME=value; `unset` names are removed first.
inline CliResult run_cli(const std::vector<std::string>& args, const std::vector<std::string>& env = {},
                         const std::vector<std::string>& unset = {}, const std::string& stdin_text = "") {
  TempDir io;
  std::string cmd;
  for (const auto& u : unset) cmd += "unset " + u + "; ";
  cmd += "env";
  for (const auto& e : env) cmd += " " + shell_quote(e);
  cmd += " " + shell_quote(TP_CLI);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  const auto in = io / "in", out = io / "out", err = io / "err";
  write_text(in, stdin_text);
  cmd += " <" + shell_quote(in.string()) + " >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

}  // namespace tpt
