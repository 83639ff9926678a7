#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fewshot {

enum class ErrorCode {
  kIo,
  kCorruptHeader,
  kCorruptRecord,
  kDimensionMismatch,
  kDuplicateSampleId,
  kUnknownLabel,
  kNonFiniteValue,
  kUnknownClass,
  kInvalidArgument,
  kInsufficientClasses,
  kInsufficientRecords,
  kSupportQueryOverlap,
  kDegenerateVector,
  kEmptyQuerySet,
  kNonFiniteLoss,
  kNoClassesRetained,
  kUnmappedLabel,
  kEmptyInput,
};

/// Stable snake_case identifier used in machine-readable error output.
std::string_view error_code_name(ErrorCode code);

/// The single exception type thrown by the library. `code()` tells callers
/// which contract was violated; `what()` names the offending item.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fewshot
