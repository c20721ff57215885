#pragma once

#include "sloc/linalg.hpp"
#include "sloc/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sloc {

/// Symmetric matrix certified at construction (‖M − Mᵀ‖ ≤ 1e-12·‖M‖).
class SymMatrix {
 public:
  explicit SymMatrix(const Mat& m);

  const Mat& mat() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }
  /// |M| = √(M²).
  Mat abs() const { return sym_abs(m_); }
  Mat abs_pow(double p) const { return sym_abs_pow(m_, p); }

 private:
  Mat m_;
};

struct Sides {
  double lhs = 0.0;
  double rhs = 0.0;
  /// max(0, lhs − rhs) / max(|lhs|, |rhs|, 1e-300).
  double relative_violation() const;
};

/// tr(AB) against (tr|A|ˢ)^{1/s}(tr|B|ᵗ)^{1/t}; needs 1/s + 1/t = 1.
Sides trace_holder(const SymMatrix& A, const SymMatrix& B, double s, double t);

/// tr((B^{1/2}AB^{1/2})^r) against tr(B^{r/2}AʳB^{r/2}) for PSD A, B and r ≥ 1.
Sides lieb_thirring(const Mat& A, const Mat& B, double r);

/// tr(A^α B A^{1−α} B) against tr(AB²) for PSD A.
Sides eldan_lieb(const Mat& A, const SymMatrix& B, double alpha);

struct ProjectedInverse {
  Mat T;
  double nullspace_residual = 0.0;  // max ‖T v‖ over an orthonormal basis of range(P)
  double finite_s = 0.0;            // s = 10⁸‖A‖
  double finite_s_error = 0.0;      // ‖(A + sP)⁻¹ − T‖₂
  double finite_s_tolerance = 0.0;  // 10‖A‖²/s
  /// First-order bound 10(1 + ‖T‖‖A‖)²/s. Unlike the one above it has the
  /// units of A⁻¹ and accounts for the conditioning of the free block.
  double finite_s_tolerance_scaled = 0.0;
  bool nullspace_ok = false;        // residual ≤ 1e-9
  bool finite_s_ok = false;
  bool finite_s_ok_scaled = false;
};

/// ((I−P)A(I−P))^† for A ≻ 0 and an orthogonal projector P, with both
/// certificates evaluated.
ProjectedInverse projected_inverse_limit(const Mat& A, const Mat& P);

enum class InstanceKind { sym, psd, projector };

/// Deterministic stream of random matrices: GOE-style (G+Gᵀ)/2, GᵀG, or the
/// projector onto the span of a random n×k Gaussian matrix with k uniform in
/// [0, n].
class RandomMatrixStream {
 public:
  RandomMatrixStream(InstanceKind kind, Index n, std::uint64_t seed);
  Mat next();

 private:
  InstanceKind kind_;
  Index n_;
  Rng rng_;
};

std::vector<Mat> random_instances(InstanceKind kind, Index n, int count, std::uint64_t seed);

struct SuiteReport {
  std::string inequality;
  int trials = 0;
  double max_violation = 0.0;
  std::uint64_t worst_instance_seed = 0;
  int failures = 0;  // relative violation above the tolerance
  double tolerance = 1e-8;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Seed used for trial `trial` of a suite seeded with `seed`. Every instance can
/// be regenerated from it alone.
std::uint64_t instance_seed(std::uint64_t seed, int trial);

/// `which` ∈ {trace_holder, lieb_thirring, eldan_lieb}. Dimensions are uniform
/// in [1, max_n] and exponents random.
SuiteReport run_inequality_suite(const std::string& which, int trials, std::uint64_t seed, int max_n = 12);

/// Random (A, P) pairs. max_violation is the worst of the two certificate
/// ratios (error / tolerance); a failure is any ratio above 1. `extra` holds
/// the same statistics for the scaled tolerance.
SuiteReport run_projected_inverse_suite(int trials, std::uint64_t seed, int max_n = 12);

}  // namespace sloc
