#include "stripescan/error.hpp"

namespace stripescan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateRange: return "DegenerateRange";
    case ErrorCode::kEmptyFov: return "EmptyFov";
    case ErrorCode::kNoFov: return "NoFov";
    case ErrorCode::kSliceTooTall: return "SliceTooTall";
    case ErrorCode::kSliceTooSmall: return "SliceTooSmall";
    case ErrorCode::kSliceTooNarrow: return "SliceTooNarrow";
    case ErrorCode::kSliceTooShort: return "SliceTooShort";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kNotStandardized: return "NotStandardized";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTooFewGroups: return "TooFewGroups";
    case ErrorCode::kNoValidFold: return "NoValidFold";
    case ErrorCode::kBandOutOfFov: return "BandOutOfFov";
    case ErrorCode::kImageTooSmall: return "ImageTooSmall";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace stripescan
