#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace offtd {

enum class ErrorCode {
  kDimensionMismatch,
  kInvalidParameter,
  kNotErgodic,
  kMixingTooSlow,
  kContractionViolated,
  kNotSubstochastic,
  kNotHurwitz,
  kZeroBehaviorProb,
  kInvalidTruncation,
  kDiverged,
  kNotVanillaIS,
  kNoFeasibleStepsize,
  kStepsizeTooLarge,
  kUnknownTag,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::int64_t> iteration = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  /// Set for kDiverged: the iteration at which the iterate blew up.
  std::optional<std::int64_t> iteration() const noexcept { return iteration_; }

 private:
  ErrorCode code_;
  std::optional<std::int64_t> iteration_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace offtd
