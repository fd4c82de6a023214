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

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "turnpilot/providers.hpp"

namespace turnpilot::semscore {

enum class Comparison { kRefVsRes0, kRes0VsRes1, kRes0VsRes2, kRes0VsRes3 };

std::string_view to_string(Comparison c) noexcept;
Comparison comparison_from_string(std::string_view s);
// Level 1..3 -> res0_vs_res<level>.
Comparison truncation_comparison(int level);
int comparison_level(Comparison c) noexcept;  // 0 for ref_vs_res0

struct ScoreRecord {
  std::string example_id;
  Comparison comparison = Comparison::kRefVsRes0;
  double value = 0.0;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::map<int, double> percentiles;

  friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

struct Histogram {
  std::vector<HistogramBin> bins;
  std::size_t below = 0;
  std::size_t above = 0;

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

struct BoxWhisker {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;

  friend bool operator==(const BoxWhisker&, const BoxWhisker&) = default;
};

// <a,b> / (|a| |b|), clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const providers::EmbeddingVector& a,
                         const providers::EmbeddingVector& b);

double semscore(std::string_view target_text, std::string_view model_text,
                providers::EmbeddingBackend& embedder,
                const providers::CallPolicy& policy = {});

// Type-7 (linear interpolation between closest ranks) on sorted input,
// p in [0, 100].
double percentile_sorted(std::span<const double> sorted, double p);
double percentile(std::span<const double> values, double p);

SummaryStats summarize(std::span<const double> values,
                       std::span<const int> percentiles = std::span<const int>{});

// Equal-width bins over [lo, hi]; a value equal to hi lands in the last bin.
Histogram histogram(std::span<const double> values, int bin_count, double lo, double hi);

// Tukey box: whiskers reach the most extreme points within 1.5 IQR of the
// quartiles, and never fall inside the box.
BoxWhisker box_whisker(std::span<const double> values);

}  // namespace turnpilot::semscore
