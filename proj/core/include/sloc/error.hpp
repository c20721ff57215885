#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sloc {

enum class ErrorCode {
  argument,
  sampling_budget,
  degenerate_ensemble,
  rank_deficient,
  degenerate_tilt,
  integrator_fault,
  linear_algebra,
  not_psd,
  insufficient_sample,
  inconsistency,
  extrapolation,
  trivial_form,
  insufficient_visits,
  cost_guard,
  config,
  not_found,
  io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// runner can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures caused by floating-point or Monte Carlo breakdown
  /// rather than bad input.
  bool is_numerical() const noexcept {
    switch (code_) {
      case ErrorCode::degenerate_ensemble:
      case ErrorCode::rank_deficient:
      case ErrorCode::degenerate_tilt:
      case ErrorCode::integrator_fault:
      case ErrorCode::linear_algebra:
      case ErrorCode::sampling_budget:
      case ErrorCode::inconsistency:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::argument: return "argument error";
    case ErrorCode::sampling_budget: return "sampling-budget error";
    case ErrorCode::degenerate_ensemble: return "degenerate-ensemble error";
    case ErrorCode::rank_deficient: return "rank-deficiency error";
    case ErrorCode::degenerate_tilt: return "degenerate-tilt error";
    case ErrorCode::integrator_fault: return "integrator fault";
    case ErrorCode::linear_algebra: return "linear-algebra error";
    case ErrorCode::not_psd: return "not-PSD error";
    case ErrorCode::insufficient_sample: return "insufficient-sample error";
    case ErrorCode::inconsistency: return "inconsistency error";
    case ErrorCode::extrapolation: return "extrapolation error";
    case ErrorCode::trivial_form: return "trivial-form error";
    case ErrorCode::insufficient_visits: return "insufficient-visits error";
    case ErrorCode::cost_guard: return "cost-guard error";
    case ErrorCode::config: return "configuration error";
    case ErrorCode::not_found: return "not-found error";
    case ErrorCode::io: return "I/O error";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace sloc
