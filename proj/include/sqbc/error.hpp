#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sqbc {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kMalformedRecord,
  kDimensionMismatch,
  kZeroVector,
  kCorruptFile,
  kEndpoint,
  kDuplicateBudget,
  kUnbalanced,
  kNonFinite,
  kEmptyPool,
  kUnknownRun,
  kDuplicateRun,
  kUnknownExample,
  kAlreadyLabeled,
  kWrongPhase,
  kNotFinalized,
  kUnauthorized,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this type; `code()` drives the
// CLI exit status and the HTTP status mapping of the annotation service.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sqbc
