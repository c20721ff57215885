#pragma once

#include "sloc/lcdist.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sloc {

struct ChainConfig {
  double delta = 0.0;  // 0 means 1/√n
  long steps = 1000;
  long burn_in = 0;
  long thin = 1;
  std::optional<Vec> start;  // nullopt: warm start, one exact draw from the model
  std::uint64_t seed = 0;

  double delta_for(int n) const;
  void validate() const;
  nlohmann::json to_json() const;
  static ChainConfig from_json(const nlohmann::json& j);
};

struct WalkStep {
  Vec x;
  bool accepted = false;
};

/// One Metropolis ball-walk step with respect to the model density.
WalkStep ball_walk_step(const Vec& x, double delta, const BaseDensity& model, Rng& rng);

struct ChainResult {
  RowMat states;                 // post burn-in, thinned
  std::vector<char> accepted;    // acceptance flag of the step that produced each stored state
  std::optional<double> acceptance_rate;  // over all steps, including burn-in; nullopt when steps = 0
  long steps = 0;
  long burn_in = 0;
  long thin = 1;
};

ChainResult run_chain(const ChainConfig& cfg, const BaseDensity& model);

using PointSet = std::function<bool(const Vec&)>;

/// Empirical P(x ∈ S, x' ∉ S) / min(π̂(S), π̂(Sᶜ)) along consecutive path states.
/// 0 when the path never leaves S. Throws insufficient_visits when S is never visited.
double conductance_estimate(const RowMat& path, const PointSet& in_set);

struct TvRow {
  long checkpoint = 0;
  double tv = 0.0;
  double noise_floor = 0.0;  // expected TV of two independent samples of these sizes
};

struct TvOptions {
  std::vector<long> checkpoints;
  int replicas = 200;
  int bins = 50;
  Index reference_size = 100000;
  std::optional<Vec> direction;  // default e₁
};

/// Replica chains (one per replica, all starting from cfg.start or from exact
/// draws) and the binned TV distance of ⟨x, θ⟩ to an exact reference sample at
/// each checkpoint.
std::vector<TvRow> tv_decay(const ChainConfig& cfg, const BaseDensity& model, const TvOptions& opts);

struct MonotoneVerdict {
  bool passes = false;
  double worst_increase = 0.0;  // largest tv[i+1] − tv[i]
  double slack = 0.0;
};

/// Non-increasing up to `slack` between consecutive checkpoints, and the last
/// value strictly below the first.
MonotoneVerdict monotone_up_to_noise(const std::vector<TvRow>& rows, double slack);

struct StationarityRow {
  long checkpoint = 0;
  double mean_proj = 0.0;
  double se_proj = 0.0;
  double mean_sq_norm = 0.0;
  double se_sq_norm = 0.0;
};

struct Stationarity {
  std::vector<StationarityRow> rows;
  double ref_proj = 0.0;
  double ref_sq_norm = 0.0;
  double max_z = 0.0;        // largest |moment − reference| / SE over rows and moments
  double max_drift_z = 0.0;  // largest |moment − moment at the first checkpoint| / paired SE
  bool passes = false;       // max_drift_z ≤ z_limit
};

/// Replicas started from exact draws. Asserts that the means of ⟨x, θ⟩ and
/// ‖x‖² do not drift away from their values at the first checkpoint; the
/// distance to the model's exact moments (or a large exact sample) is reported.
Stationarity stationarity_check(const ChainConfig& cfg, const BaseDensity& model, const std::vector<long>& checkpoints,
                                int replicas, const Vec& direction, double z_limit = 3.0);

struct DetailedBalance {
  double flow_ab = 0.0;  // P(x ∈ a, x' ∈ b)
  double flow_ba = 0.0;
  double se = 0.0;       // SE of flow_ab − flow_ba
  double z = 0.0;
  bool passes = false;
};

/// Two cells {⟨x,θ⟩ ∈ [a_lo, a_hi)} and {⟨x,θ⟩ ∈ [b_lo, b_hi)}; one step from
/// each of `transitions` exact stationary draws.
DetailedBalance detailed_balance_check(const BaseDensity& model, double delta, const Vec& direction, double a_lo,
                                       double a_hi, double b_lo, double b_hi, Index transitions, std::uint64_t seed,
                                       double z_limit = 3.0);

void write_chain_csv(std::ostream& out, const ChainResult& chain);
nlohmann::json tv_to_json(const std::vector<TvRow>& rows);

}  // namespace sloc
