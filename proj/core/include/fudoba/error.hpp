// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fudoba {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kEmptyFile,
  kDimensionMismatch,
  kNonFiniteValue,
  kDuplicateRowId,
  kEmptyIntersection,
  kUnalignedInputs,
  kRankOutOfRange,
  kNoActiveModalities,
  kSingleClass,
  kInsufficientData,
  kFactorizationFailure,
  kSpaceExhausted,
  kNetwork,
  kDimensionDrift,
};

std::string_view error_code_name(ErrorCode code);

/// Distinguishes bad input (user-fixable) from failures that happen while
/// computing or talking to the network. The CLI maps these to exit codes.
enum class ErrorCategory { kValidation, kRuntime, kNetwork };

ErrorCategory error_category(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return error_category(code_); }

 private:
  ErrorCode code_;
};

}  // namespace fudoba
