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

#include "turnpilot/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "turnpilot/error.hpp"
#include "turnpilot/io.hpp"
#include "turnpilot/semscore.hpp"

namespace turnpilot::report {

namespace fs = std::filesystem;
using nlohmann::json;

Format format_from_string(std::string_view s) {
  if (s == "csv") return Format::kCsv;
  if (s == "json") return Format::kJson;
  if (s == "svg") return Format::kSvg;
  fail(ErrorCode::kInvalidArgument, "unknown report format '" + std::string(s) + "' (csv, json, svg)");
}

namespace {

struct BoxRow {
  std::string comparison;
  semscore::BoxWhisker box;
  std::size_t n = 0;
};

struct RetainedRow {
  int level = 0;
  std::size_t count = 0;
  double fraction = 0.0;
  std::size_t total = 0;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string svg_open(int w, int h, const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
    << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  return s.str();
}

constexpr int kW = 640, kH = 360, kLeft = 50, kRight = 20, kTop = 30, kBottom = 40;
constexpr const char* kBar = "#4c72b0";
constexpr const char* kBoxFill = "#dd8452";

std::string histogram_svg(const semscore::Histogram& h) {
  std::size_t peak = 1;
  for (const auto& b : h.bins) peak = std::max(peak, b.count);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const double bw = pw / static_cast<double>(h.bins.size());
  std::ostringstream s;
  s << svg_open(kW, kH, "ref vs res-0 scores");
  for (std::size_t i = 0; i < h.bins.size(); ++i) {
    const double bh = ph * static_cast<double>(h.bins[i].count) / static_cast<double>(peak);
    s << "<rect x=\"" << kLeft + bw * i << "\" y=\"" << kTop + ph - bh << "\" width=\"" << bw - 1 << "\" height=\""
      << bh << "\" fill=\"" << kBar << "\"/>\n";
  }
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
    << "\" stroke=\"#000\"/>\n";
  s << "<text x=\"" << kLeft << "\" y=\"" << kH - 20 << "\">" << short_num(h.bins.front().lo) << "</text>\n";
  s << "<text x=\"" << kLeft + pw << "\" y=\"" << kH - 20 << "\" text-anchor=\"end\">" << short_num(h.bins.back().hi)
    << "</text>\n";
  s << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\">" << peak << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string box_svg(const std::vector<BoxRow>& rows) {
  double lo = 0.0, hi = 1.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.box.whisker_low);
    hi = std::max(hi, r.box.whisker_high);
    for (double o : r.box.outliers) lo = std::min(lo, o), hi = std::max(hi, o);
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto y = [&](double v) { return kTop + ph * (hi - v) / (hi - lo); };
  const double slot = pw / static_cast<double>(rows.size());
  std::ostringstream s;
  s << svg_open(kW, kH, "SEMSCORE by comparison");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& b = rows[i].box;
    const double cx = kLeft + slot * (i + 0.5), half = slot * 0.2;
    s << "<line x1=\"" << cx << "\" y1=\"" << y(b.whisker_low) << "\" x2=\"" << cx << "\" y2=\"" << y(b.whisker_high)
      << "\" stroke=\"#000\"/>\n";
    s << "<rect x=\"" << cx - half << "\" y=\"" << y(b.q3) << "\" width=\"" << 2 * half << "\" height=\""
      << y(b.q1) - y(b.q3) << "\" fill=\"" << kBoxFill << "\" stroke=\"#000\"/>\n";
    s << "<line x1=\"" << cx - half << "\" y1=\"" << y(b.median) << "\" x2=\"" << cx + half << "\" y2=\""
      << y(b.median) << "\" stroke=\"#000\" stroke-width=\"2\"/>\n";
    for (double o : b.outliers)
      s << "<circle cx=\"" << cx << "\" cy=\"" << y(o) << "\" r=\"2\" fill=\"none\" stroke=\"#000\"/>\n";
    s << "<text x=\"" << cx << "\" y=\"" << kH - 20 << "\" text-anchor=\"middle\">" << rows[i].comparison
      << "</text>\n";
  }
  s << "<text x=\"" << kLeft - 6 << "\" y=\"" << y(hi) + 4 << "\" text-anchor=\"end\">" << short_num(hi) << "</text>\n";
  s << "<text x=\"" << kLeft - 6 << "\" y=\"" << y(lo) + 4 << "\" text-anchor=\"end\">" << short_num(lo) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string retained_svg(const std::vector<RetainedRow>& rows) {
  std::size_t peak = 1;
  for (const auto& r : rows) peak = std::max({peak, r.total, r.count});
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const double slot = pw / static_cast<double>(rows.size());
  std::ostringstream s;
  s << svg_open(kW, kH, "questions retained per truncation level");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double bh = ph * static_cast<double>(rows[i].count) / static_cast<double>(peak);
    const double x = kLeft + slot * i + slot * 0.2;
    s << "<rect x=\"" << x << "\" y=\"" << kTop + ph - bh << "\" width=\"" << slot * 0.6 << "\" height=\"" << bh
      << "\" fill=\"" << kBar << "\"/>\n";
    s << "<text x=\"" << x + slot * 0.3 << "\" y=\"" << kTop + ph - bh - 4 << "\" text-anchor=\"middle\">"
      << rows[i].count << "</text>\n";
    s << "<text x=\"" << x + slot * 0.3 << "\" y=\"" << kH - 20 << "\" text-anchor=\"middle\">level "
      << rows[i].level << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

json box_to_json(const BoxRow& r) {
  return {{"comparison", r.comparison},
          {"n", r.n},
          {"q1", r.box.q1},
          {"median", r.box.median},
          {"q3", r.box.q3},
          {"whisker_low", r.box.whisker_low},
          {"whisker_high", r.box.whisker_high},
          {"outliers", r.box.outliers}};
}

}  // namespace

std::vector<fs::path> emit_report(const pipeline::RunPaths& run, Format format, int histogram_bins) {
  pipeline::require_files({run.scores(), run.labels(), run.stats()});
  const auto scores = experiment::read_scores(run.scores());
  const auto labels = experiment::read_labels(run.labels());
  const json stats = json::parse(io::read_file(run.stats()));

  std::vector<double> reference;
  for (const auto& s : scores)
    if (s.comparison == semscore::Comparison::kRefVsRes0) reference.push_back(s.value);
  if (reference.empty()) fail(ErrorCode::kEmptyInput, run.scores().string() + " holds no ref_vs_res0 scores");

  const auto hist = semscore::histogram(reference, histogram_bins, 0.0, 1.0);

  std::vector<BoxRow> boxes;
  boxes.push_back({"ref_vs_res0", semscore::box_whisker(reference), reference.size()});
  for (int level = 1; level <= corpus::kMaxLevel; ++level) {
    std::vector<double> values;
    for (const auto& l : labels)
      if (l.level == level) values.push_back(l.similarity_to_res0);
    if (values.empty()) continue;
    boxes.push_back({std::string(semscore::to_string(semscore::truncation_comparison(level))),
                     semscore::box_whisker(values), values.size()});
  }

  std::vector<RetainedRow> retained;
  if (!stats.contains("retained")) fail(ErrorCode::kMissingStageOutput, run.stats().string() + " lacks 'retained'");
  for (int level = 1; level <= corpus::kMaxLevel; ++level) {
    const auto key = std::to_string(level);
    if (!stats["retained"].contains(key)) continue;
    const auto& r = stats["retained"][key];
    retained.push_back({level, r.at("count").get<std::size_t>(), r.at("fraction").get<double>(),
                        r.at("total").get<std::size_t>()});
  }

  fs::create_directories(run.figures());
  const fs::path f1 = run.figures() / "fig1_histogram";
  const fs::path f2 = run.figures() / "fig2_box";
  const fs::path f3 = run.figures() / "fig3_retained";
  std::vector<fs::path> written;
  auto put = [&](fs::path base, const char* ext, const std::string& body) {
    base += ext;
    io::write_file_atomic(base, body);
    written.push_back(base);
  };

  switch (format) {
    case Format::kCsv: {
      std::string c1 = "bin_lo,bin_hi,count\n";
      for (const auto& b : hist.bins) c1 += num(b.lo) + ',' + num(b.hi) + ',' + std::to_string(b.count) + '\n';
      std::string c2 = "comparison,stat,value\n";
      for (const auto& r : boxes) {
        auto row = [&](const char* stat, double v) { c2 += r.comparison + ',' + stat + ',' + num(v) + '\n'; };
        row("n", static_cast<double>(r.n));
        row("q1", r.box.q1);
        row("median", r.box.median);
        row("q3", r.box.q3);
        row("whisker_low", r.box.whisker_low);
        row("whisker_high", r.box.whisker_high);
        row("outliers", static_cast<double>(r.box.outliers.size()));
      }
      std::string c3 = "level,count,fraction,total\n";
      for (const auto& r : retained)
        c3 += std::to_string(r.level) + ',' + std::to_string(r.count) + ',' + num(r.fraction) + ',' +
              std::to_string(r.total) + '\n';
      put(f1, ".csv", c1);
      put(f2, ".csv", c2);
      put(f3, ".csv", c3);
      break;
    }
    case Format::kJson: {
      json j1 = json::array();
      for (const auto& b : hist.bins) j1.push_back({{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"count", b.count}});
      json j2 = json::array();
      for (const auto& r : boxes) j2.push_back(box_to_json(r));
      json j3 = json::array();
      for (const auto& r : retained)
        j3.push_back({{"level", r.level}, {"count", r.count}, {"fraction", r.fraction}, {"total", r.total}});
      put(f1, ".json", json{{"bins", j1}, {"below", hist.below}, {"above", hist.above}}.dump(2) + "\n");
      put(f2, ".json", j2.dump(2) + "\n");
      put(f3, ".json", j3.dump(2) + "\n");
      break;
    }
    case Format::kSvg:
      put(f1, ".svg", histogram_svg(hist));
      put(f2, ".svg", box_svg(boxes));
      if (retained.empty()) fail(ErrorCode::kEmptyInput, "no retained counts to chart");
      put(f3, ".svg", retained_svg(retained));
      break;
  }
  return written;
}

}  // namespace turnpilot::report
