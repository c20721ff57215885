#pragma once

#include "sloc/error.hpp"
#include "sloc/lcdist.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sloc {

/// r ↦ max(1, κ·r^e).
struct PsiCurve {
  double kappa = 1.0;
  double exponent = 0.25;

  double operator()(double r) const;
  nlohmann::json to_json() const;
  static PsiCurve from_json(const nlohmann::json& j);
};

enum class ControlMode { identity, adaptive };

struct ControlPolicy {
  ControlMode mode = ControlMode::identity;
  double u = 0.0;  // freezing threshold (adaptive only)
  int q = 2;       // potential exponent
  PsiCurve psi;

  static ControlPolicy identity(int q = 2);
  static ControlPolicy adaptive(double u, int q, PsiCurve psi = {});
  /// 0.25·n^{−1/q}
  static double default_u(int n, int q);

  void validate() const;
  nlohmann::json to_json() const;
  static ControlPolicy from_json(const nlohmann::json& j, int n);
};

struct ControlMatrix {
  Mat C;
  int rank = 0;           // r = n − rank(P)
  Mat frozen_projector;   // P
  double psi = 1.0;       // ψ_{2r}; 1 in identity mode
};

/// Eigenvalues of B within this distance of u count as frozen.
double frozen_tolerance(const Mat& B);

ControlMatrix control_matrix(const Mat& A, const Mat& B, const ControlPolicy& policy);

/// Largest s with B + sC ⪯ uI, computed on the unfrozen block. +∞ when C = 0.
double max_step_below_cap(const Mat& B, const ControlMatrix& control, double u);

double tilt_log_weight(const Vec& x, const Vec& c, const Mat& B);

/// prior log-weights + cᵀx − ½xᵀBx, normalized. Throws degenerate_tilt when
/// fewer than two particles keep a weight above e^{−700} of the largest.
Ensemble reweight(const Ensemble& base, const Vec& c, const Mat& B);

struct GaussianPosterior {
  Vec mu;
  Mat A;
};

/// Exact tilted moments of a Gaussian base: A = (Σ⁻¹+B)⁻¹, μ = A(Σ⁻¹m + c).
GaussianPosterior gaussian_oracle(const Mat& sigma, const Vec& m, const Vec& c, const Mat& B);

struct LocState {
  double t = 0.0;
  Vec c;
  Mat B;
  Vec mu;
  Mat A;
  double ess = 0.0;
};

/// A particle cloud that represents the tilt (anchor_c, anchor_B) with its own
/// weights. Any other tilt is obtained by reweighting with the difference.
struct TiltedCloud {
  Ensemble particles;
  Vec anchor_c;
  Mat anchor_B;

  static TiltedCloud untilted(Ensemble base);
  Ensemble at(const Vec& c, const Mat& B) const;
};

LocState make_state(double t, Vec c, Mat B, const Ensemble& tilted);
LocState initial_state(const Ensemble& base);

struct StepOptions {
  bool zero_noise = false;
  /// Upper bound on h from the caller (remaining horizon).
  double max_h = std::numeric_limits<double>::infinity();
};

struct StepOutcome {
  LocState state;
  Ensemble tilted;
  ControlMatrix control;  // the control used for this step
  double h_used = 0.0;
};

/// One Euler–Maruyama step. Under adaptive control h is shortened so that B
/// never crosses uI; the direction that reaches u is frozen from then on.
StepOutcome step(const LocState& state, const TiltedCloud& cloud, const ControlPolicy& policy, double h,
                 Rng& rng, const StepOptions& opts = {});
StepOutcome step(const LocState& state, const Ensemble& base, const ControlPolicy& policy, double h, Rng& rng,
                 const StepOptions& opts = {});

// ---------------------------------------------------------------------------
// Whole runs
// ---------------------------------------------------------------------------

struct SetIndicator {
  std::string name;
  std::function<bool(const Vec&)> contains;
};

SetIndicator halfspace_set(std::string name, Vec normal, double offset);  // {⟨x,normal⟩ ≥ offset}
SetIndicator whole_space_set(std::string name = "all");
SetIndicator empty_set(std::string name = "none");

struct RunOptions {
  Index particles = 2000;
  double ess_refresh_fraction = 0.1;
  bool record_third_moment = false;
  bool zero_noise = false;
  /// Keep A at every record (needed by potential_diagnostics).
  bool keep_snapshots = true;
};

struct TrajectoryRecord {
  double t = 0.0;
  double phi2 = 0.0;        // tr A²
  double phiq = 0.0;        // tr (A − I)^q
  double phiq_plain = 0.0;  // tr A^q
  double opnorm_a = 0.0;
  double tr_b = 0.0;
  double min_eig_b = 0.0;
  double max_eig_b = 0.0;
  int r = 0;
  double ess = 0.0;
  std::vector<double> g;

  // Control in force from this record to the next one.
  double tr_c = 0.0;
  int rank_c = 0;
  double psi_2r = 1.0;
  double focus = 0.0;            // ‖A^{1/2} C A^{1/2}‖
  double step_bound_literal = 0.0;    // r^{1+1/q}/(ψ²(Φ^{1/q}+1))
  double step_bound_corrected = 0.0;  // r^{1+1/q}/(ψ²(Φ^{1/q}+r^{1/q}))
  double qv_bound = 0.0;         // ‖C^{1/2} A C^{1/2}‖
  double tr_a3c = 0.0;           // tr(A³C)
  double third_moment_term = std::numeric_limits<double>::quiet_NaN();  // Σ M_ijk M_ijl C_kl

  // The step that produced this record.
  double h = 0.0;
  double min_eig_dB = 0.0;
  bool refreshed = false;
};

struct Trajectory {
  std::vector<std::string> set_names;
  int q = 2;
  double u = 0.0;
  std::vector<TrajectoryRecord> records;
  std::vector<Mat> A_snapshots;
  std::optional<std::string> fault;
  ErrorCode fault_code = ErrorCode::argument;
  nlohmann::json manifest;

  bool ok() const { return !fault.has_value(); }
  const TrajectoryRecord& final() const { return records.back(); }
};

/// Samples the base once and integrates to T with nominal step T/k. On an
/// error the partial trajectory is returned with `fault` set.
Trajectory run(const BaseDensity& base, const ControlPolicy& policy, double T, int k,
               const std::vector<SetIndicator>& sets, std::uint64_t seed, const RunOptions& opts = {});

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_control_csv(std::ostream& out, const Trajectory& traj);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct DriftWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  double phi0 = 0.0;
  double delta_hat = 0.0;       // finite-difference slope of tr A²
  double delta_analytic = 0.0;  // time average of −2tr(A³C) + third-moment term
  double quad_var_hat = 0.0;    // realized variance rate of tr A²
};

struct PotentialDiagnostics {
  std::vector<DriftWindow> windows;
  /// max over windows of delta_hat / Φ₂^{3/2}.
  double fitted_c_prime = 0.0;
  bool third_moment_included = false;
};

/// Non-overlapping windows of `window` steps.
PotentialDiagnostics potential_diagnostics(const Trajectory& traj, int window);

/// Per window: realized variance rate of g divided by the mean of
/// ‖C^{1/2}AC^{1/2}‖. Zero when g does not move.
std::vector<double> quadratic_variation_check(const Trajectory& traj, std::size_t set_index, int window);

}  // namespace sloc
