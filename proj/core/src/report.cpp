#include "sloc/report.hpp"

#include <cmath>
#include <limits>

namespace sloc {

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::assert_pass: return "assert-pass";
    case Verdict::assert_fail: return "assert-fail";
    case Verdict::report_only: return "report-only";
  }
  return "report-only";
}

nlohmann::json CheckResult::to_json() const {
  return {{"name", name}, {"lhs", lhs},     {"rhs", rhs},
          {"se", se},     {"ratio", ratio}, {"verdict", std::string(to_string(verdict))}};
}

double safe_ratio(double lhs, double rhs) {
  if (rhs == 0.0) return lhs == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), lhs);
  return lhs / rhs;
}

CheckResult asserted_le(std::string name, double lhs, double rhs, double se, double slack) {
  const bool ok = std::isfinite(lhs) && std::isfinite(rhs) && lhs <= rhs + slack;
  return {std::move(name), lhs, rhs, se, safe_ratio(lhs, rhs), ok ? Verdict::assert_pass : Verdict::assert_fail};
}

CheckResult reported(std::string name, double lhs, double rhs, double se) {
  return {std::move(name), lhs, rhs, se, safe_ratio(lhs, rhs), Verdict::report_only};
}

}  // namespace sloc
