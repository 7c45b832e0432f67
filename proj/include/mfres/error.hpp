/*
   Copyright 2026 The mfres Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mfres {

enum class ErrorKind {
  NonPositiveWeight,
  BoundViolation,
  DimensionMismatch,
  GridTooSmall,
  GridMismatch,
  ConfigNotExample52,
  EnsembleParamMismatch,
  ConfigInvalid,
  NoDescentProgress,
  SingularSystem,
  NoConvergence,
  MassMismatch,
  SizeMismatch,
  GradCheckFailed,
};

constexpr std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorKind::BoundViolation: return "BoundViolation";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::ConfigNotExample52: return "ConfigNotExample52";
    case ErrorKind::EnsembleParamMismatch: return "EnsembleParamMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::NoDescentProgress: return "NoDescentProgress";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::MassMismatch: return "MassMismatch";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::GradCheckFailed: return "GradCheckFailed";
  }
  return "Unknown";
}

// Every failure the library reports carries one of the kinds above; the CLI
// prints error_name() and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(error_name(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

// Thrown by the fixed-point solver; keeps the per-iteration sup-norm changes.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& detail, std::vector<double> trace)
      : Error(ErrorKind::NoConvergence, detail), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

inline void require(bool cond, ErrorKind kind, const std::string& detail) {
  if (!cond) throw Error(kind, detail);
}

}  // namespace mfres
