#pragma once

#include "sloc/lcdist.hpp"
#include "sloc/localization.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace sloc {

struct CutReport {
  Vec direction;
  double offset = 0.0;
  double boundary_density = 0.0;  // projected density at the offset, per unit length
  double min_side_measure = 0.0;  // in (0, 1/2]
  double expansion = 0.0;         // boundary_density / min_side_measure
  double expansion_se = 0.0;      // kernel-estimate noise only
  double bandwidth = 0.0;
};

/// Halfspace {⟨x,direction⟩ ≥ offset}. The boundary density is a weighted
/// Gaussian kernel estimate of the projected density with bandwidth
/// 1.06·σ·ESS^{−1/5}. Throws extrapolation when the offset is outside the
/// projected range.
CutReport halfspace_cut(const Ensemble& e, const Vec& direction, double offset);

/// Weighted median of ⟨x, direction⟩.
double weighted_median(const Ensemble& e, const Vec& direction);

struct BestCut {
  CutReport worst;            // minimum expansion
  double psi_estimate = 0.0;  // 1 / worst.expansion, a lower bound on ψ
  std::vector<CutReport> cuts;
};

/// Cuts at the weighted median along the 2n signed coordinate axes and
/// `n_directions` uniformly random unit vectors.
BestCut best_halfspace_expansion(const Ensemble& e, int n_directions, std::uint64_t seed);

struct GaussianFactor {
  double measured_expansion = 0.0;
  double bound = 0.0;  // ‖B⁻¹‖^{−1/2}
  double ratio = 0.0;
  double floor = 0.5;
  bool passes = false;
};

/// Best halfspace expansion of the tilted cloud against ‖B⁻¹‖^{−1/2}.
GaussianFactor gaussian_factor_expansion(const BaseDensity& base, const Mat& B, const Ensemble& e_tilted,
                                         int n_directions = 16, std::uint64_t seed = 0, double floor = 0.5);

struct PoincareRatio {
  double ratio = 0.0;   // Var(xᵀAx) / E‖Ax‖²
  int rank = 0;         // rank(A + Aᵀ)
  double psi_sq = 0.0;  // ψ_rank²
};

PoincareRatio poincare_ratio(const Ensemble& e, const Mat& A, const PsiCurve& psi = {});

struct KlsRow {
  int ell = 1;
  double log_alpha = 0.0;
  double beta = 0.0;
  double log_bound = 0.0;  // log(α n^β)
};

struct KlsTable {
  std::vector<KlsRow> rows;
  int best_ell = 1;
  double best_log_bound = 0.0;
  bool beta_decreasing = true;
  bool beta_within_16_over_ell = true;
  bool unimodal = true;
};

/// α_{ℓ+1} = 4Cα_ℓβ_ℓ^{−1/2}√(log n), β_{ℓ+1} = β_ℓ − β_ℓ²/16, kept in log space.
KlsTable kls_recursion(double alpha1, double beta1, double n, int iterations, double C = 1.0);

/// True when the sequence decreases (weakly) and then increases (weakly).
bool is_unimodal(const std::vector<double>& values);

void write_cuts_csv(std::ostream& out, const BestCut& best);
nlohmann::json to_json(const BestCut& best);

}  // namespace sloc
