#pragma once

#include <stdexcept>
#include <string>

namespace mvpi {

enum class ErrorCode {
  InvalidArgument,
  InvariantViolation,
  NumericFailure,
  NonErgodicChain,
  UncoveredStateAction,
  ZeroDenominator,
  DegenerateSample,
  Divergence,
  ConvergenceFailure,
  Io,
  Parse,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code survives
/// the trip through the C API as a status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace mvpi
