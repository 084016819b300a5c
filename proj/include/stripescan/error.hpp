#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stripescan {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateRange,
  kEmptyFov,
  kNoFov,
  kSliceTooTall,
  kSliceTooSmall,
  kSliceTooNarrow,
  kSliceTooShort,
  kLengthMismatch,
  kSingleClass,
  kTooFewRows,
  kNotStandardized,
  kDimensionMismatch,
  kTooFewGroups,
  kNoValidFold,
  kBandOutOfFov,
  kImageTooSmall,
  kIoFailure,
  kParseError,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; the code lets callers
// (and the CLI exit-code mapping) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stripescan
