#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace knnmem {

/// Machine-readable failure categories. The names double as the wire codes
/// returned by the HTTP service.
enum class ErrorCode {
  kDimensionMismatch,
  kUnknownId,
  kEmptyCollection,
  kZeroNorm,
  kNonFinite,
  kLabelInvalid,
  kDuplicateId,
  kChecksumFailed,
  kFormatError,
  kInvalidArgument,
  kNotFound,
  kIoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string offending_field = {},
        std::optional<std::uint64_t> byte_offset = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::string& offending_field() const noexcept { return field_; }
  /// Set for segment parse failures: position of the first bad byte.
  std::optional<std::uint64_t> byte_offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::string field_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace knnmem
