#include "knnmem/error.hpp"

#include <utility>

namespace knnmem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kUnknownId: return "UNKNOWN_ID";
    case ErrorCode::kEmptyCollection: return "EMPTY_COLLECTION";
    case ErrorCode::kZeroNorm: return "ZERO_NORM";
    case ErrorCode::kNonFinite: return "NON_FINITE";
    case ErrorCode::kLabelInvalid: return "LABEL_INVALID";
    case ErrorCode::kDuplicateId: return "DUPLICATE_ID";
    case ErrorCode::kChecksumFailed: return "CHECKSUM_FAILED";
    case ErrorCode::kFormatError: return "FORMAT_ERROR";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kNotFound: return "NOT_FOUND";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

Error::Error(ErrorCode code, std::string message, std::string offending_field,
             std::optional<std::uint64_t> byte_offset)
    : std::runtime_error(std::move(message)),
      code_(code),
      field_(std::move(offending_field)),
      offset_(byte_offset) {}

}  // namespace knnmem
