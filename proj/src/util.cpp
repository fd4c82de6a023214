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

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "turnpilot/error.hpp"
#include "turnpilot/hash.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/log.hpp"
#include "turnpilot/text.hpp"

namespace turnpilot {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kZeroUsableExamples: return "ZeroUsableExamples";
    case ErrorCode::kEmptyQuestion: return "EmptyQuestion";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kProviderRejection: return "ProviderRejection";
    case ErrorCode::kCacheCorrupt: return "CacheCorrupt";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kMissingPairing: return "MissingPairing";
    case ErrorCode::kFailureCeiling: return "FailureCeiling";
    case ErrorCode::kSingleClassData: return "SingleClassData";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kMissingTruncation: return "MissingTruncation";
    case ErrorCode::kMissingModel: return "MissingModel";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kMissingStageOutput: return "MissingStageOutput";
    case ErrorCode::kMissingCredentials: return "MissingCredentials";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string digest128(std::string_view bytes) {
  return hex64(stable_hash(bytes, kHashSeed)) + hex64(stable_hash(bytes, kHashSeed ^ 0x9e3779b97f4a7c15ULL));
}

namespace text {

namespace {
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::size_t word_count(std::string_view s) { return split_words(s).size(); }

std::string join(const std::vector<std::string_view>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> alnum_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace text

namespace log {

namespace {
std::mutex& sink_mutex() {
  static std::mutex mu;
  return mu;
}
Sink& sink_ref() {
  static Sink sink;
  return sink;
}
Level& min_level() {
  static Level level = Level::kInfo;
  return level;
}
std::string_view level_name(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warning";
    case Level::kError: return "error";
  }
  return "?";
}
}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  sink_ref() = std::move(sink);
}

void reset_sink() { set_sink(nullptr); }

void set_min_level(Level level) {
  std::lock_guard lock(sink_mutex());
  min_level() = level;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (level < min_level()) return;
  if (sink_ref()) {
    sink_ref()(level, message);
    return;
  }
  std::cerr << "[turnpilot] " << level_name(level) << ": " << message << '\n';
}

}  // namespace log

namespace io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.'
         << counter.fetch_add(1) << '.'
         << std::chrono::steady_clock::now().time_since_epoch().count();
  std::filesystem::path tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(ErrorCode::kIo, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kMalformedRecord,
           path.string() + ":" + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
    }
    try {
      fn(record, line_no);
    } catch (const Error&) {
      throw;
    } catch (const json::exception& e) {
      fail(ErrorCode::kMalformedRecord,
           path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string canonical(const json& value) { return value.dump(-1, ' ', false); }

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += canonical(r);
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace io

}  // namespace turnpilot
