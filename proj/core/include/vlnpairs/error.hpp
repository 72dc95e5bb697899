// Copyright 2026 The vlnpairs Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlnpairs {

enum class ErrorCode {
  PreconditionViolated,
  InvalidTrajectory,
  LabelerUnavailable,
  ActionClientUnavailable,
  NoValidTrajectory,
  BackendTimeout,
  BackendRejected,
  RetriesExhausted,
  EmptyInstruction,
  NonConvergent,
  ExtractionFailure,
  DegenerateTrajectory,
  InsufficientDistractors,
  FeatureProviderUnavailable,
  IoError,
  SchemaMismatch,
  RejectedPairIncluded,
  ConfigError,
  PipelineError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. `attempts` is filled in by
// operations that retry (gateway and adapter clients); zero otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int attempts = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        attempts_(attempts),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  int attempts() const noexcept { return attempts_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  int attempts_;
  std::string detail_;
};

}  // namespace vlnpairs
