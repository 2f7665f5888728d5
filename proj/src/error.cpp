#include "bindet/error.hpp"

namespace bindet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kEmptyMask: return "empty-mask";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kMalformedInput: return "malformed-input";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kNoRoi: return "no-roi";
    case ErrorCode::kUndefinedAp: return "undefined-ap";
    case ErrorCode::kBackendFailure: return "backend-failure";
    case ErrorCode::kBackendUnavailable: return "backend-unavailable";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kContractViolation: return "contract-violation";
  }
  return "unknown";
}

namespace {

std::string format_what(ErrorCode code, const std::string& message, const std::string& stage) {
  std::string out;
  if (!stage.empty()) {
    out += "[" + stage + "] ";
  }
  out += std::string(to_string(code));
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string message, std::string stage)
    : std::runtime_error(format_what(code, message, stage)),
      code_(code),
      stage_(std::move(stage)),
      detail_(std::move(message)) {}

}  // namespace bindet
