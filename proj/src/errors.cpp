#include "nopeek/errors.hpp"

namespace nopeek {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "DIMENSION";
    case ErrorCode::kSampleSize: return "SAMPLE_SIZE";
    case ErrorCode::kDegenerateVariance: return "DEGENERATE_VARIANCE";
    case ErrorCode::kDegenerateData: return "DEGENERATE_DATA";
    case ErrorCode::kContract: return "CONTRACT";
    case ErrorCode::kLabel: return "LABEL";
    case ErrorCode::kConfig: return "CONFIG";
    case ErrorCode::kProtocol: return "PROTOCOL";
    case ErrorCode::kMalformedFrame: return "MALFORMED_FRAME";
    case ErrorCode::kUnknownType: return "UNKNOWN_TYPE";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kFormat: return "FORMAT";
    case ErrorCode::kLinearAlgebra: return "LINEAR_ALGEBRA";
    case ErrorCode::kTraining: return "TRAINING";
    case ErrorCode::kIo: return "IO";
  }
  return "UNKNOWN";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return 2;
    case ErrorCode::kProtocol:
    case ErrorCode::kMalformedFrame:
    case ErrorCode::kUnknownType:
    case ErrorCode::kLengthMismatch:
      return 3;
    default:
      return 1;
  }
}

}  // namespace nopeek
