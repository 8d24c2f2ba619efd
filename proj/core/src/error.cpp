#include "vulaste/error.hpp"

namespace vulaste {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
      return "invalid input";
    case ErrorCode::kUnsupportedLanguage:
      return "unsupported language";
    case ErrorCode::kOutOfRange:
      return "out of range";
    case ErrorCode::kParse:
      return "parse error";
    case ErrorCode::kUnreconstructable:
      return "unreconstructable";
    case ErrorCode::kInvalidDataset:
      return "invalid dataset";
    case ErrorCode::kInvalidSplit:
      return "invalid split";
    case ErrorCode::kIncompatibleArtifact:
      return "incompatible artifact";
    case ErrorCode::kIo:
      return "i/o error";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace vulaste
