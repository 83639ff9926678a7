#include "fewshot/error.hpp"

namespace fewshot {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kCorruptHeader: return "corrupt_header";
    case ErrorCode::kCorruptRecord: return "corrupt_record";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kDuplicateSampleId: return "duplicate_sample_id";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kNonFiniteValue: return "non_finite_value";
    case ErrorCode::kUnknownClass: return "unknown_class";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInsufficientClasses: return "insufficient_classes";
    case ErrorCode::kInsufficientRecords: return "insufficient_records";
    case ErrorCode::kSupportQueryOverlap: return "support_query_overlap";
    case ErrorCode::kDegenerateVector: return "degenerate_vector";
    case ErrorCode::kEmptyQuerySet: return "empty_query_set";
    case ErrorCode::kNonFiniteLoss: return "non_finite_loss";
    case ErrorCode::kNoClassesRetained: return "no_classes_retained";
    case ErrorCode::kUnmappedLabel: return "unmapped_label";
    case ErrorCode::kEmptyInput: return "empty_input";
  }
  return "unknown";
}

}  // namespace fewshot
