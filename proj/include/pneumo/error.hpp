#pragma once

#include <stdexcept>
#include <string>

namespace pneumo {

/// Error categories shared by every module. The C API maps these 1:1 onto
/// pn_status values, and the CLI maps them onto process exit codes.
enum class ErrorCode {
  kInvalidInput = 1,
  kIo = 2,
  kFormatBadMagic = 3,
  kFormatTruncated = 4,
  kFormatNonFinite = 5,
  kFormatBadDtype = 6,
  kFormatBadHeader = 7,
  kNumeric = 8,
  kConvergence = 9,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  bool is_format_error() const noexcept {
    return code_ >= ErrorCode::kFormatBadMagic &&
           code_ <= ErrorCode::kFormatBadHeader;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorCode::kInvalidInput, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw_invalid(what);
}

}  // namespace pneumo
