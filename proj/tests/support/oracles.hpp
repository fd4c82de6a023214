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

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

// Test-side helpers and reference implementations. Nothing here calls into
// the library so the oracles stay independent of the code under test.
namespace tpt {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("tp-test-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// ---- oracles -------------------------------------------------------------

// Scalar-product cosine without clamping.
inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Type-7: rank r = (n - 1) p, interpolate between x[floor r] and x[floor r + 1].
inline double oracle_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p / 100.0;
  std::size_t j = 0;
  while (static_cast<double>(j + 1) <= h) ++j;
  if (j + 1 >= v.size()) return v.back();
  return v[j] + (h - static_cast<double>(j)) * (v[j + 1] - v[j]);
}

inline double oracle_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double oracle_pop_sd(const std::vector<double>& v) {
  const double m = oracle_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

struct OracleHistogram {
  std::vector<std::size_t> counts;
  std::size_t below = 0, above = 0;
};

// Linear scan over every bin's [edge_i, edge_{i+1}); hi goes to the last bin.
inline OracleHistogram oracle_histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  OracleHistogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  auto edge = [&](int i) { return i == bins ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins); };
  for (double v : values) {
    if (v < lo) {
      ++h.below;
      continue;
    }
    if (v > hi) {
      ++h.above;
      continue;
    }
    bool placed = false;
    for (int i = 0; i < bins && !placed; ++i) {
      const bool last = i == bins - 1;
      if (v >= edge(i) && (v < edge(i + 1) || (last && v <= hi))) {
        ++h.counts[static_cast<std::size_t>(i)];
        placed = true;
      }
    }
  }
  return h;
}

struct OracleBox {
  double q1, median, q3, low, high;
  std::vector<double> outliers;
};

inline OracleBox oracle_box(const std::vector<double>& values) {
  OracleBox b;
  b.q1 = oracle_percentile(values, 25);
  b.median = oracle_percentile(values, 50);
  b.q3 = oracle_percentile(values, 75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.low = b.q1;
  b.high = b.q3;
  for (double v : values) {
    if (v < lo || v > hi) {
      b.outliers.push_back(v);
      continue;
    }
    b.low = std::min(b.low, v);
    b.high = std::max(b.high, v);
  }
  std::sort(b.outliers.begin(), b.outliers.end());
  return b;
}

// Vowel-group syllable count, one word at a time.
inline int oracle_syllables(const std::string& text) {
  int total = 0;
  std::stringstream in(text);
  std::string word;
  while (in >> word) {
    int groups = 0;
    bool prev = false, letter = false;
    for (char c : word) {
      const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      letter = letter || std::isalpha(static_cast<unsigned char>(l));
      const bool v = std::string("aeiouy").find(l) != std::string::npos;
      if (v && !prev) ++groups;
      prev = v;
    }
    total += groups == 0 && letter ? 1 : groups;
  }
  return total;
}

inline std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Reference bag-of-tokens cosine: the same tokenization rule as the offline
// embedder, computed over token counts without hashing.
inline std::vector<std::string> oracle_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace tpt
