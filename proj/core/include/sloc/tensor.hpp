#pragma once

#include "sloc/lcdist.hpp"
#include "sloc/localization.hpp"
#include "sloc/report.hpp"

#include <array>
#include <vector>

namespace sloc {

struct TensorEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Index pairs_used = 0;
};

/// Dense symmetric third-moment tensor, index (i, j, k) ↦ i·n² + j·n + k.
struct Moment3 {
  Index n = 0;
  std::vector<double> data;

  double operator()(Index i, Index j, Index k) const { return data[(i * n + j) * n + k]; }
};

/// Ê x_i x_j x_k (raw moments).
Moment3 third_moments(const Ensemble& e);
/// Ê (x−μ)_i (x−μ)_j (x−μ)_k.
Moment3 central_third_moments(const Ensemble& e, const Vec& mean);

/// Σ_{ijkl} M_ijk M_ijl C_kl.
double moment_contraction(const Moment3& m, const Mat& C);

/// Σ M_ikm A_ij B_kl C_mn M'_jln.
double contract(const Moment3& x, const Mat& A, const Mat& B, const Mat& C, const Moment3& y);

/// Split-half estimator of T_p(A,B,C) = E(xᵀAy)(xᵀBy)(xᵀCy): x runs over the
/// first half of the cloud, y over the second, and the average over all
/// |X|·|Y| pairs is taken exactly through third-moment tensors. Standard
/// errors are delete-one-group jackknife over 20 groups.
class TensorEstimator {
 public:
  static constexpr int kGroups = 20;

  explicit TensorEstimator(const Ensemble& e);

  struct Term {
    double coef;
    Mat A, B, C;
  };

  TensorEstimate estimate(const Mat& A, const Mat& B, const Mat& C) const;
  /// Σ coef·T(A,B,C) with a jackknife error for the combination.
  TensorEstimate combination(const std::vector<Term>& terms) const;

  /// Full value followed by the kGroups leave-one-group-out values, for
  /// jackknifing nonlinear functions of several estimates.
  std::vector<double> replicate_values(const Mat& A, const Mat& B, const Mat& C) const;
  static double jackknife(const std::vector<double>& replicate_values);

  Index dim() const { return n_; }
  Index pairs() const { return pairs_; }

 private:
  std::vector<double> replicates(const Mat& A, const Mat& B, const Mat& C) const;
  TensorEstimate summarize(const std::vector<double>& reps) const;

  Index n_ = 0;
  Index pairs_ = 0;
  Moment3 full_x_, full_y_;
  std::vector<Moment3> loo_x_, loo_y_;
};

TensorEstimate tensor_T(const Ensemble& e, const Mat& A, const Mat& B, const Mat& C);

/// Δ_i = Ê x xᵀ ⟨x, v_i⟩ for each column v_i of `directions`.
std::vector<Mat> delta_slices(const Ensemble& e, const Mat& directions);
std::vector<Mat> delta_slices(const Ensemble& e);

struct TequResult {
  double lhs = 0.0;   // Σ_{a,b} w_a w_b (x_aᵀAx_b)(x_aᵀBx_b)(x_aᵀx_b)
  double rhs1 = 0.0;  // Σ_i tr(AΔ_iBΔ_i)
  double rhs2 = 0.0;  // Σ_{ij} A_ij tr(Δ_iBΔ_j)
  double max_rel_gap() const;
};

/// All three forms on the full empirical measure; the double sum is brute
/// force up to 4000 points and a moment contraction above that.
TequResult tequ_check(const Ensemble& e, const Mat& A, const Mat& B);

struct MatrixTriple {
  Mat first, second, third;
};

/// PSD triples: T ≥ −3·SE. Symmetric triples: T(B) ≤ T(|B|) + 3·SE of the
/// paired difference.
std::vector<CheckResult> trabs_check(const Ensemble& e, const std::vector<MatrixTriple>& psd_triples,
                                     const std::vector<MatrixTriple>& sym_triples);

struct ThirdMomentCube {
  double value = 0.0;  // Σ_{ijk} (Ê x_i x_j x_k)²
  double per_n = 0.0;
};

/// Throws cost_guard for n > 64.
ThirdMomentCube third_moment_cube(const Ensemble& e);

struct NormRatio {
  double ratio = 0.0;
  double numerator = 0.0;  // Ê|⟨x−μ,y−μ⟩|³
  double std_error = 0.0;  // of the numerator
  Index pairs_used = 0;
};

/// Ê|⟨x−μ,y−μ⟩|³ / tr(Â²)^{3/2} over split-half pairs (distinct cyclic
/// shifts, at most `max_pairs`).
NormRatio tensor_norm_ratio(const Ensemble& e, Index max_pairs = 10'000'000);

/// ‖Ê B^{1/2}(x−μ)(x−μ)ᵀC(x−μ)‖ / (‖Â^{1/2}BÂ^{1/2}‖^{1/2} tr|Â^{1/2}CÂ^{1/2}|).
CheckResult tensorestimate_ratio(const Ensemble& e, const Mat& B, const Mat& C);

/// The seven tensor inequalities on an isotropic cloud. Only item 7 is
/// asserted.
std::vector<CheckResult> tinq_report(const Ensemble& e, const Mat& A, const Mat& B, const PsiCurve& psi,
                                     double s = 2.0);

CheckResult liebtr_check(const Ensemble& e, const Mat& A, const Mat& B, const Mat& C, double alpha);

struct HalfspaceProfile {
  std::vector<double> v;      // V_t(y)
  std::vector<double> bound;  // e^{1 − |t|/‖y‖}
  bool within_bound = true;   // for t ≥ 0
};

HalfspaceProfile halfspace_profile_V(const Ensemble& e, const Vec& y, const std::vector<double>& t_grid);

/// tr(ΔPΔ)/ψ_{min(2r,n)}² with Δ = Ê x xᵀ⟨x,v⟩ and r = rank P.
CheckResult trDAD_projection_check(const Ensemble& e, const Vec& v, const Mat& P, const PsiCurve& psi);

}  // namespace sloc
