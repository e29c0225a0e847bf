#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nopeek {

enum class ErrorCode {
  kDimension,
  kSampleSize,
  kDegenerateVariance,
  kDegenerateData,
  kContract,
  kLabel,
  kConfig,
  kProtocol,
  kMalformedFrame,
  kUnknownType,
  kLengthMismatch,
  kFormat,
  kLinearAlgebra,
  kTraining,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Process exit status for an error: 2 for configuration problems, 3 for
/// anything raised by the wire protocol, 1 otherwise.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace nopeek
