#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bindet {

enum class ErrorCode {
  kInvalidArgument,     // caller bug: violated precondition
  kDimensionMismatch,
  kEmptyMask,
  kBehindCamera,
  kMalformedInput,      // RLE / JSON / PLY content is not what it claims to be
  kNotFound,
  kIo,
  kValidation,          // well-formed input with out-of-range values
  kConfig,
  kNoRoi,
  kUndefinedAp,
  kBackendFailure,      // backend ran and reported failure
  kBackendUnavailable,  // transport / timeout; retryable
  kProtocol,            // malformed remote payload
  kContractViolation,   // backend returned data that breaks its contract
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `stage` names the pipeline stage
/// or backend kind that raised it, so a failure in a batch run can be
/// attributed without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string stage = {});

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

  /// Retry attempts made before giving up (remote backends only).
  [[nodiscard]] int attempts() const noexcept { return attempts_; }
  Error& with_attempts(int n) {
    attempts_ = n;
    return *this;
  }

 private:
  ErrorCode code_;
  std::string stage_;
  std::string detail_;
  int attempts_ = 0;
};

}  // namespace bindet
