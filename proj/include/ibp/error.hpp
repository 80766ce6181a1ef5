#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ibp {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateWeights,
  kInvalidBins,
  kNumericBlowup,
  kShape,
  kZeroWeightEvidence,
  kIncompleteLattice,
  kPredictorFailure,
  kTimeout,
  kMalformedMessage,
  kVersionMismatch,
  kInvariantViolation,
  kDeterminismViolation,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as this exception; `code()` lets
// callers branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const char* message) {
  if (!condition) fail(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace ibp
