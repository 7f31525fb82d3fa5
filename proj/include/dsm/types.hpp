/*
* Copyright 2026 The DSM Authors.
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     https://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
* ============================================================================
*/
// Core data types and the error hierarchy shared by every module.

#ifndef DSM_TYPES_HPP_
#define DSM_TYPES_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dsm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kNonConvergence,
  kSeparation,
  kRankDeficient,
  kDegenerateScore,
  kMTooLarge,
  kJTooLarge,
  kRhoOutOfRange,
  kBracketFailure,
  kInfeasibleRatio,
  kDomainError,
  kParseError,
  kSchemaMismatch,
  kNonpositiveWeight,
};

// Coarse grouping used for process exit codes.
enum class ErrorCategory { kUsage, kSchema, kNumeric, kConvergence };

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kSeparation: return "Separation";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kDegenerateScore: return "DegenerateScore";
    case ErrorCode::kMTooLarge: return "MTooLarge";
    case ErrorCode::kJTooLarge: return "JTooLarge";
    case ErrorCode::kRhoOutOfRange: return "RhoOutOfRange";
    case ErrorCode::kBracketFailure: return "BracketFailure";
    case ErrorCode::kInfeasibleRatio: return "InfeasibleRatio";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kNonpositiveWeight: return "NonpositiveWeight";
  }
  return "Unknown";
}

inline ErrorCategory error_category(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kNonpositiveWeight:
    case ErrorCode::kShapeMismatch:
      return ErrorCategory::kSchema;
    case ErrorCode::kNonConvergence:
    case ErrorCode::kSeparation:
    case ErrorCode::kBracketFailure:
      return ErrorCategory::kConvergence;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMTooLarge:
    case ErrorCode::kJTooLarge:
    case ErrorCode::kRhoOutOfRange:
      return ErrorCategory::kUsage;
    default:
      return ErrorCategory::kNumeric;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Nonprobability sample: covariates and observed outcomes.
struct SampleA {
  Matrix x;
  Vector y;

  Index size() const { return x.rows(); }
};

// Probability sample: covariates and design weights d_i = 1 / pi_i.
struct SampleB {
  Matrix x;
  Vector d;

  Index size() const { return x.rows(); }
};

inline void validate(const SampleA& a) {
  if (a.x.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "sample A is empty");
  if (a.y.size() != a.x.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "sample A outcome length differs from row count");
  }
  if (!a.x.allFinite() || !a.y.allFinite()) {
    throw Error(ErrorCode::kDomainError, "sample A contains non-finite values");
  }
}

inline void validate(const SampleB& b) {
  if (b.x.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "sample B is empty");
  if (b.d.size() != b.x.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "sample B weight length differs from row count");
  }
  if (!b.x.allFinite() || !b.d.allFinite()) {
    throw Error(ErrorCode::kDomainError, "sample B contains non-finite values");
  }
  if ((b.d.array() <= 0.0).any()) {
    throw Error(ErrorCode::kNonpositiveWeight, "design weights must be positive");
  }
}

inline void validate(const SampleA& a, const SampleB& b) {
  validate(a);
  validate(b);
  if (a.x.cols() != b.x.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "samples have different covariate counts");
  }
}

}  // namespace dsm

#endif  // DSM_TYPES_HPP_
