#include "pneumo/error.hpp"

namespace pneumo {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormatBadMagic: return "format-bad-magic";
    case ErrorCode::kFormatTruncated: return "format-truncated";
    case ErrorCode::kFormatNonFinite: return "format-non-finite";
    case ErrorCode::kFormatBadDtype: return "format-bad-dtype";
    case ErrorCode::kFormatBadHeader: return "format-bad-header";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kConvergence: return "convergence";
  }
  return "unknown";
}

}  // namespace pneumo
