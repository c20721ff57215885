#pragma once

#include "sloc/error.hpp"
#include "sloc/report.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sloc {

enum class ExperimentKind { localize, inequalities, tensor, isoperimetry, ballwalk, suite };

std::string_view to_string(ExperimentKind k) noexcept;
ExperimentKind experiment_kind_from_string(const std::string& s);

struct Constants {
  double c1 = 0.01;           // identity horizon T = c1/√n
  double T_max_coeff = 0.01;  // adaptive horizon T_max = T_max_coeff/q²
  std::optional<double> u;    // default 0.25·n^{−1/q}
  double kappa = 1.0;
  int q = 2;
};

/// One experiment. See docs/config.md for the file format.
struct RunConfig {
  ExperimentKind kind = ExperimentKind::localize;
  nlohmann::json base;    // density spec, completed with n when missing
  nlohmann::json policy;  // {"mode": "identity"} by default
  long N = 2000;
  int n = 4;
  std::optional<double> T;
  int k = 2000;
  std::vector<std::uint64_t> seeds;
  Constants constants;
  std::filesystem::path output_dir;
  nlohmann::json sets;    // array of {"type": "halfspace", "normal": [...], "offset": x} | {"type": "all"}
  nlohmann::json params;  // the block named after the kind, if any
  nlohmann::json blocks;  // every per-kind block as given; the suite hands them down
  int threads = 1;

  /// Collects every offending field before throwing a config error.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// T if given, else c1/√n (identity) or T_max_coeff/q² (adaptive).
  double horizon() const;
};

RunConfig load_config(const std::filesystem::path& path);

/// $SLOC_OUTPUT_DIR, or "sloc-out".
std::filesystem::path default_output_dir();

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::localize;
  std::vector<CheckResult> checks;
  nlohmann::json summary;
  std::vector<std::string> faults;  // numerical faults, with seed context
  int exit_code = 0;                // 0 pass, 1 assertion failure, 3 numerical fault
};

/// Runs every seed, writes per-seed artifacts under config.output_dir and a
/// summary.json with one entry per check.
ExperimentResult run_experiment(const RunConfig& config);

/// Maps an error to the CLI exit code: 2 for configuration problems, 3 otherwise.
int exit_code_for(const Error& e) noexcept;

struct CatalogEntry {
  std::string check;
  ExperimentKind kind;
};

/// Every asserted check and the experiment kind that emits it.
const std::vector<CatalogEntry>& asserted_check_catalog();

struct WilsonInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

WilsonInterval wilson_interval(long successes, long trials, double z = 1.96);

/// Cross-seed aggregate over every manifest.json and summary.json below
/// `dir`. Throws not_found when there are none.
nlohmann::json summarize(const std::filesystem::path& dir);

}  // namespace sloc
