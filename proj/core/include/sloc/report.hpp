#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace sloc {

enum class Verdict { assert_pass, assert_fail, report_only };

std::string_view to_string(Verdict v) noexcept;

/// One row of a check report. `ratio` is lhs/rhs when that is meaningful.
struct CheckResult {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;
  double ratio = 0.0;
  Verdict verdict = Verdict::report_only;

  bool failed() const { return verdict == Verdict::assert_fail; }
  nlohmann::json to_json() const;
};

/// lhs/rhs with 0/0 = 0 and x/0 = +inf.
double safe_ratio(double lhs, double rhs);

/// Asserted check: passes when lhs ≤ rhs + slack.
CheckResult asserted_le(std::string name, double lhs, double rhs, double se, double slack);
CheckResult reported(std::string name, double lhs, double rhs, double se = 0.0);

}  // namespace sloc
