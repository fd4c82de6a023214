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

#include "turnpilot/semscore.hpp"

#include <algorithm>
#include <cmath>

#include "turnpilot/error.hpp"

namespace turnpilot::semscore {

std::string_view to_string(Comparison c) noexcept {
  switch (c) {
    case Comparison::kRefVsRes0: return "ref_vs_res0";
    case Comparison::kRes0VsRes1: return "res0_vs_res1";
    case Comparison::kRes0VsRes2: return "res0_vs_res2";
    case Comparison::kRes0VsRes3: return "res0_vs_res3";
  }
  return "?";
}

Comparison comparison_from_string(std::string_view s) {
  for (Comparison c : {Comparison::kRefVsRes0, Comparison::kRes0VsRes1, Comparison::kRes0VsRes2,
                       Comparison::kRes0VsRes3})
    if (to_string(c) == s) return c;
  fail(ErrorCode::kMalformedRecord, "unknown comparison tag '" + std::string(s) + "'");
}

Comparison truncation_comparison(int level) {
  switch (level) {
    case 1: return Comparison::kRes0VsRes1;
    case 2: return Comparison::kRes0VsRes2;
    case 3: return Comparison::kRes0VsRes3;
    default: fail(ErrorCode::kInvalidArgument, "no truncation comparison for level " + std::to_string(level));
  }
}

int comparison_level(Comparison c) noexcept {
  switch (c) {
    case Comparison::kRefVsRes0: return 0;
    case Comparison::kRes0VsRes1: return 1;
    case Comparison::kRes0VsRes2: return 2;
    case Comparison::kRes0VsRes3: return 3;
  }
  return 0;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorCode::kDimensionMismatch, "cosine of vectors with dims " + std::to_string(a.size()) +
                                            " and " + std::to_string(b.size()));
  if (a.empty()) fail(ErrorCode::kZeroVector, "cosine of empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::kZeroVector, "cosine with a zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine_similarity(const providers::EmbeddingVector& a, const providers::EmbeddingVector& b) {
  return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

double semscore(std::string_view target_text, std::string_view model_text,
                providers::EmbeddingBackend& embedder, const providers::CallPolicy& policy) {
  auto target = providers::embed_text(target_text, embedder, policy);
  auto model = providers::embed_text(model_text, embedder, policy);
  return cosine_similarity(target, model);
}

namespace {

void require_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "non-finite value in input");
}

std::vector<double> sorted_copy(std::span<const double> values) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail(ErrorCode::kEmptyInput, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 100.0)) fail(ErrorCode::kInvalidArgument, "percentile outside [0, 100]");
  const double h = static_cast<double>(sorted.size() - 1) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double percentile(std::span<const double> values, double p) {
  require_finite(values);
  auto s = sorted_copy(values);
  return percentile_sorted(s, p);
}

SummaryStats summarize(std::span<const double> values, std::span<const int> percentiles) {
  if (values.empty()) fail(ErrorCode::kEmptyInput, "summary of an empty list");
  require_finite(values);
  SummaryStats st;
  st.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = sum / static_cast<double>(st.n);
  double ss = 0.0;
  for (double v : values) ss += (v - st.mean) * (v - st.mean);
  st.sd = std::sqrt(ss / static_cast<double>(st.n));
  auto s = sorted_copy(values);
  st.min = s.front();
  st.max = s.back();
  for (int p : percentiles) st.percentiles[p] = percentile_sorted(s, p);
  return st;
}

Histogram histogram(std::span<const double> values, int bin_count, double lo, double hi) {
  if (bin_count < 1) fail(ErrorCode::kInvalidArgument, "bin count must be >= 1");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    fail(ErrorCode::kInvalidArgument, "histogram range must satisfy lo < hi");
  require_finite(values);

  const auto n = static_cast<std::size_t>(bin_count);
  std::vector<double> edges(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  edges[n] = hi;

  Histogram h;
  h.bins.resize(n);
  for (std::size_t i = 0; i < n; ++i) h.bins[i] = {edges[i], edges[i + 1], 0};
  for (double v : values) {
    if (v < lo) {
      ++h.below;
      continue;
    }
    if (v > hi) {
      ++h.above;
      continue;
    }
    // Guess from the width, then settle against the stored edges so bin
    // membership is exactly edges[i] <= v < edges[i+1].
    auto i = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(n)));
    i = std::min(i, n - 1);
    while (i > 0 && v < edges[i]) --i;
    while (i + 1 < n && v >= edges[i + 1]) ++i;
    ++h.bins[i].count;
  }
  return h;
}

BoxWhisker box_whisker(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kEmptyInput, "box plot of an empty list");
  require_finite(values);
  auto s = sorted_copy(values);
  BoxWhisker b;
  b.q1 = percentile_sorted(s, 25);
  b.median = percentile_sorted(s, 50);
  b.q3 = percentile_sorted(s, 75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;

  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  bool have_low = false, have_high = false;
  for (double v : s) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    if (!have_low) {
      b.whisker_low = v;
      have_low = true;
    }
    b.whisker_high = v;
    have_high = true;
  }
  // Whiskers never retreat inside the box.
  if (!have_low || b.whisker_low > b.q1) b.whisker_low = b.q1;
  if (!have_high || b.whisker_high < b.q3) b.whisker_high = b.q3;
  return b;
}

}  // namespace turnpilot::semscore
