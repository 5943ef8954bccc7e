#include "sqbc/error.hpp"

namespace sqbc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kMalformedRecord: return "malformed_record";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kZeroVector: return "zero_vector";
    case ErrorCode::kCorruptFile: return "corrupt_file";
    case ErrorCode::kEndpoint: return "endpoint_error";
    case ErrorCode::kDuplicateBudget: return "duplicate_budget_exhausted";
    case ErrorCode::kUnbalanced: return "unbalanced_labels";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kEmptyPool: return "empty_pool";
    case ErrorCode::kUnknownRun: return "unknown_run";
    case ErrorCode::kDuplicateRun: return "duplicate_run";
    case ErrorCode::kUnknownExample: return "unknown_example";
    case ErrorCode::kAlreadyLabeled: return "already_labeled";
    case ErrorCode::kWrongPhase: return "wrong_phase";
    case ErrorCode::kNotFinalized: return "not_finalized";
    case ErrorCode::kUnauthorized: return "unauthorized";
  }
  return "unknown";
}

}  // namespace sqbc
