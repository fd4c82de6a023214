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

#include <stdexcept>
#include <string>
#include <string_view>

namespace turnpilot {

// Values mirror the TP_E_* codes of the C API.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kIo = 2,
  kMalformedRecord = 3,
  kZeroUsableExamples = 4,
  kEmptyQuestion = 5,
  kTooShort = 6,
  kEmptyInput = 7,
  kTimeout = 8,
  kAuthFailure = 9,
  kProviderRejection = 10,
  kCacheCorrupt = 11,
  kDimensionMismatch = 12,
  kZeroVector = 13,
  kMissingPairing = 14,
  kFailureCeiling = 15,
  kSingleClassData = 16,
  kNonFiniteLoss = 17,
  kMissingTruncation = 18,
  kMissingModel = 19,
  kConfig = 20,
  kMissingStageOutput = 21,
  kMissingCredentials = 22,
  kInternal = 99,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by backends for failures worth retrying (network, 429, 5xx).
class TransientError : public Error {
 public:
  explicit TransientError(const std::string& message)
      : Error(ErrorCode::kTimeout, message) {}
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace turnpilot
