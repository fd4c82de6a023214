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

#include <filesystem>
#include <string_view>
#include <vector>

#include "turnpilot/pipeline.hpp"

// Figure analogues from a run directory: histogram of ref_vs_res0 scores,
// box-whisker per truncation comparison, retained counts per level.
namespace turnpilot::report {

enum class Format { kCsv, kJson, kSvg };

Format format_from_string(std::string_view s);

// Writes figures/fig{1,2,3}_*.<ext>; returns the written paths. Throws
// kMissingStageOutput when scores/labels/stats are absent and kEmptyInput when
// there is nothing to chart.
std::vector<std::filesystem::path> emit_report(const pipeline::RunPaths& run, Format format,
                                               int histogram_bins = 20);

}  // namespace turnpilot::report
