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

#include <cstdint>
#include <string>
#include <string_view>

namespace turnpilot {

// FNV-1a over bytes, finished with the splitmix64 avalanche. Stable across
// platforms and runs; recorded in run manifests as kHashAlgorithm/kHashSeed.
inline constexpr std::uint64_t kHashSeed = 0xcbf29ce484222325ULL;
inline constexpr std::string_view kHashAlgorithm = "fnv1a64+splitmix64";

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = kHashSeed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stable_hash(std::string_view bytes,
                                    std::uint64_t seed = kHashSeed) noexcept {
  return mix64(fnv1a64(bytes, seed));
}

std::string hex64(std::uint64_t value);

// 128-bit digest as 32 hex chars: two independently seeded stable hashes.
std::string digest128(std::string_view bytes);

}  // namespace turnpilot
