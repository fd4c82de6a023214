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

#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Minimal TOML subset: comments, [section] headers, and `key = value` where the
// value is a quoted string, boolean, number, or flat array of those. Header-only
// so the CLI can share it without reaching into the library internals.
namespace turnpilot::kv {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<std::string, double, bool, Array> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
};

struct Entry {
  std::string key;  // "section.key", or "key" at top level
  Value value;
  std::string raw;  // text after '='
  int line = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string_view origin, int line, const std::string& what)
      : std::runtime_error(std::string(origin) + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

namespace detail {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Removes a trailing comment that is not inside a string.
inline std::string_view drop_comment(std::string_view s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::string_view origin, int line)
      : s_(text), origin_(origin), line_(line) {}

  Value parse_all() {
    Value v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) error("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void error(const std::string& what) const { throw ParseError(origin_, line_, what); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  Value parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) error("missing value");
    char c = s_[pos_];
    if (c == '"') return Value{parse_string()};
    if (c == '[') return Value{parse_array()};
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return Value{true};
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return Value{false};
    }
    return Value{parse_number()};
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) error("unterminated escape");
        char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: error(std::string("unknown escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    if (pos_ >= s_.size()) error("unterminated string");
    ++pos_;
    return out;
  }

  Array parse_array() {
    ++pos_;
    Array out;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    for (;;) {
      out.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) error("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      error("expected ',' or ']' in array");
    }
  }

  double parse_number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' &&
           s_[pos_] != '\t')
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    std::string cleaned;
    for (char c : tok)
      if (c != '_') cleaned += c;
    if (cleaned.empty()) error("missing value");
    char* end = nullptr;
    double v = std::strtod(cleaned.c_str(), &end);
    if (end != cleaned.c_str() + cleaned.size()) error("invalid value '" + tok + "'");
    return v;
  }

  std::string_view s_;
  std::string_view origin_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<Entry> parse(std::string_view text, std::string_view origin = "<config>") {
  std::vector<Entry> out;
  std::map<std::string, int> seen;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string_view body = detail::strip(detail::drop_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ParseError(origin, line_no, "unterminated section header");
      section = std::string(detail::strip(body.substr(1, body.size() - 2)));
      if (section.empty()) throw ParseError(origin, line_no, "empty section name");
      continue;
    }
    std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(origin, line_no, "expected key = value");
    std::string key(detail::strip(body.substr(0, eq)));
    if (key.empty()) throw ParseError(origin, line_no, "empty key");
    std::string_view raw = detail::strip(body.substr(eq + 1));
    Entry e;
    e.key = section.empty() ? key : section + "." + key;
    e.raw = std::string(raw);
    e.line = line_no;
    e.value = detail::ValueParser(raw, origin, line_no).parse_all();
    if (auto it = seen.find(e.key); it != seen.end())
      throw ParseError(origin, line_no,
                       "duplicate key '" + e.key + "' (first at line " + std::to_string(it->second) + ")");
    seen[e.key] = line_no;
    out.push_back(std::move(e));
  }
  return out;
}

// Scalar rendering used when a config value feeds a string-typed setting.
inline std::string to_string(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v.data)) return *s;
  if (const auto* b = std::get_if<bool>(&v.data)) return *b ? "true" : "false";
  if (const auto* d = std::get_if<double>(&v.data)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  std::string out;
  for (const auto& item : std::get<Array>(v.data)) {
    if (!out.empty()) out += ",";
    out += to_string(item);
  }
  return out;
}

}  // namespace turnpilot::kv
