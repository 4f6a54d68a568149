#ifndef GEOSYNTH_ERRORS_HPP
#define GEOSYNTH_ERRORS_HPP

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace geosynth {

/// Failure categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorCode {
  kIo = 3,
  kSchema = 4,
  kParse = 5,
  kInsufficientData = 6,
  kNumerical = 7,
  kDomain = 8,
  kDimensionMismatch = 9,
  kValidation = 10,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kValidation: return "validation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

using WarningHandler = std::function<void(std::string_view)>;

/// Process-wide sink for non-fatal diagnostics (jitter, desk-scale inference).
inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(std::string_view msg) { warning_handler()(msg); }

}  // namespace geosynth

#endif  // GEOSYNTH_ERRORS_HPP
