#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spca {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  budget_exceeded,
  zero_spectral_gap,
  not_converged,
  not_psd,
  parse_error,
  degenerate_input,
  sample_too_small,
};

/// Stable machine-readable token for an error code (used on the CLI's stderr line).
inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "INVALID_ARGUMENT";
    case ErrorCode::dimension_mismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::budget_exceeded: return "BUDGET_EXCEEDED";
    case ErrorCode::zero_spectral_gap: return "ZERO_SPECTRAL_GAP";
    case ErrorCode::not_converged: return "NOT_CONVERGED";
    case ErrorCode::not_psd: return "NOT_PSD";
    case ErrorCode::parse_error: return "PARSE_ERROR";
    case ErrorCode::degenerate_input: return "DEGENERATE_INPUT";
    case ErrorCode::sample_too_small: return "SAMPLE_TOO_SMALL";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail
}  // namespace spca
