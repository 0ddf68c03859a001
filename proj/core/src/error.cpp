#include "offtd/error.hpp"

namespace offtd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidParameter: return "InvalidParameter";
    case ErrorCode::kNotErgodic: return "NotErgodic";
    case ErrorCode::kMixingTooSlow: return "MixingTooSlow";
    case ErrorCode::kContractionViolated: return "ContractionViolated";
    case ErrorCode::kNotSubstochastic: return "NotSubstochastic";
    case ErrorCode::kNotHurwitz: return "NotHurwitz";
    case ErrorCode::kZeroBehaviorProb: return "ZeroBehaviorProb";
    case ErrorCode::kInvalidTruncation: return "InvalidTruncation";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kNotVanillaIS: return "NotVanillaIS";
    case ErrorCode::kNoFeasibleStepsize: return "NoFeasibleStepsize";
    case ErrorCode::kStepsizeTooLarge: return "StepsizeTooLarge";
    case ErrorCode::kUnknownTag: return "UnknownTag";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::int64_t> iteration)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      iteration_(iteration) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace offtd
