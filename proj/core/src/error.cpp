// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/error.hpp"

namespace fudoba {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDuplicateRowId: return "DuplicateRowId";
    case ErrorCode::kEmptyIntersection: return "EmptyIntersection";
    case ErrorCode::kUnalignedInputs: return "UnalignedInputs";
    case ErrorCode::kRankOutOfRange: return "RankOutOfRange";
    case ErrorCode::kNoActiveModalities: return "NoActiveModalities";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kFactorizationFailure: return "FactorizationFailure";
    case ErrorCode::kSpaceExhausted: return "SpaceExhausted";
    case ErrorCode::kNetwork: return "NetworkError";
    case ErrorCode::kDimensionDrift: return "DimensionDrift";
  }
  return "Unknown";
}

ErrorCategory error_category(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFactorizationFailure:
    case ErrorCode::kSpaceExhausted:
    case ErrorCode::kIo:
    case ErrorCode::kDimensionDrift:
      return ErrorCategory::kRuntime;
    case ErrorCode::kNetwork:
      return ErrorCategory::kNetwork;
    default:
      return ErrorCategory::kValidation;
  }
}

}  // namespace fudoba
