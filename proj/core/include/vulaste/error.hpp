#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vulaste {

enum class ErrorCode {
  kInvalidInput,
  kUnsupportedLanguage,
  kOutOfRange,
  kParse,
  kUnreconstructable,
  kInvalidDataset,
  kInvalidSplit,
  kIncompatibleArtifact,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library. The code lets callers (the CLI in
// particular) map failures onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace vulaste
