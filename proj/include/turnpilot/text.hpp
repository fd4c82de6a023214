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

#include <string>
#include <string_view>
#include <vector>

namespace turnpilot::text {

// Whitespace-delimited tokens.
std::vector<std::string_view> split_words(std::string_view s);

std::size_t word_count(std::string_view s);

std::string join(const std::vector<std::string_view>& parts, std::string_view sep);

// Case-folds ASCII and splits on runs of non-alphanumeric bytes. Bytes >= 0x80
// are kept inside tokens so UTF-8 words are not shredded.
std::vector<std::string> alnum_tokens(std::string_view s);

std::string trim(std::string_view s);

std::string to_lower_ascii(std::string_view s);

}  // namespace turnpilot::text
