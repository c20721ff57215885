#pragma once

#include "sloc/linalg.hpp"
#include "sloc/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sloc {

// ---------------------------------------------------------------------------
// Base densities
// ---------------------------------------------------------------------------

struct GaussianKind {
  Vec mean;
  Mat cov;
};

struct UniformBoxKind {
  Vec half_widths;
};

/// Coordinates are i.i.d. Exp(1) − 1: centered, unit variance, E x³ = 2.
struct ProductExponentialKind {};

/// Uniform on {s ≥ 0, Σ s ≤ 1}. With `isotropic` the exact affine map to mean
/// zero / identity covariance is applied.
struct UniformSimplexKind {
  bool isotropic = true;
};

struct CustomKind {
  std::string name;
  std::function<Vec(Rng&)> sampler;
  std::function<double(const Vec&)> log_density;
};

using DensityKind =
    std::variant<GaussianKind, UniformBoxKind, ProductExponentialKind, UniformSimplexKind, CustomKind>;

/// Truncation radius used when none is given: n + 20, so the cut mass of every
/// built-in isotropic family is negligible even in one dimension.
double default_truncation_radius(int n);

/// A logconcave base measure restricted to the ball ‖x‖ ≤ R.
class BaseDensity {
 public:
  static BaseDensity gaussian(Vec mean, Mat cov, std::optional<double> radius = std::nullopt);
  static BaseDensity standard_gaussian(int n, std::optional<double> radius = std::nullopt);
  static BaseDensity uniform_box(Vec half_widths, std::optional<double> radius = std::nullopt);
  /// Half-width √3 per axis, so the covariance is the identity.
  static BaseDensity isotropic_box(int n, std::optional<double> radius = std::nullopt);
  static BaseDensity product_exponential(int n, std::optional<double> radius = std::nullopt);
  static BaseDensity uniform_simplex(int n, bool isotropic = true,
                                     std::optional<double> radius = std::nullopt);
  static BaseDensity custom(int n, std::string name, std::function<Vec(Rng&)> sampler,
                            std::function<double(const Vec&)> log_density, double radius);

  int dim() const noexcept { return n_; }
  double truncation_radius() const noexcept { return radius_; }
  const DensityKind& kind() const noexcept { return kind_; }
  std::string kind_name() const;

  /// Unnormalized log-density: finite on the (truncated) support, −∞ outside.
  double log_density(const Vec& x) const;

  /// Mean/covariance of the untruncated law, when known in closed form.
  std::optional<Vec> analytic_mean() const;
  std::optional<Mat> analytic_cov() const;

  /// Mean zero and identity covariance in closed form.
  bool is_isotropic() const;

  /// One draw from the untruncated law.
  Vec draw_untruncated(Rng& rng) const;

  nlohmann::json to_json() const;
  /// Custom densities cannot be reconstructed from JSON.
  static BaseDensity from_json(const nlohmann::json& j);

 private:
  BaseDensity(int n, double radius, DensityKind kind);
  void prepare_simplex();

  int n_ = 0;
  double radius_ = 0.0;
  DensityKind kind_;
  // Cached factors for Gaussian sampling / evaluation and the simplex map.
  Mat factor_;
  Mat inverse_factor_;
  Vec shift_;
};

/// One draw from the tilted density p(x)·exp(cᵀx − ½ Σ b_i x_i²) restricted to
/// the box Π[−h_i, h_i] (before the ball truncation). Exact, per coordinate.
Vec sample_tilted_box(const Vec& half_widths, const Vec& c, const Vec& b_diag, Rng& rng);

// ---------------------------------------------------------------------------
// Weighted ensembles
// ---------------------------------------------------------------------------

/// A fixed N × n point cloud with per-point log-weights. Immutable; the point
/// matrix is shared between ensembles that only differ in weights.
class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(RowMat points, Vec log_weights);
  Ensemble(std::shared_ptr<const RowMat> points, Vec log_weights);
  static Ensemble uniform(RowMat points);

  Index size() const noexcept { return points_ ? points_->rows() : 0; }
  Index dim() const noexcept { return points_ ? points_->cols() : 0; }
  const RowMat& points() const { return *points_; }
  std::shared_ptr<const RowMat> shared_points() const { return points_; }
  auto point(Index i) const { return points_->row(i); }

  const Vec& log_weights() const noexcept { return log_weights_; }
  /// log Σ exp(log_weights).
  double log_normalizer() const noexcept { return log_norm_; }
  /// Normalized weights (sum to 1).
  const Vec& weights() const noexcept { return weights_; }
  /// (Σw)²/Σw² ∈ [1, N].
  double ess() const noexcept { return ess_; }

  Ensemble with_log_weights(Vec log_weights) const;

 private:
  void normalize();

  std::shared_ptr<const RowMat> points_;
  Vec log_weights_;
  Vec weights_;
  double log_norm_ = 0.0;
  double ess_ = 0.0;
};

/// N i.i.d. draws from the truncated base density with uniform weights.
/// Rejection on ‖x‖ > R with a budget of 100·N proposals.
Ensemble sample_base(const BaseDensity& model, Index count, std::uint64_t seed);
Ensemble sample_base(const BaseDensity& model, Index count, Rng& rng);

struct Moments {
  Vec mean;
  Mat cov;
};

/// Weighted mean and covariance. The covariance is symmetrized and its
/// eigenvalues floored at zero. Requires ESS ≥ 2.
Moments weighted_mean_cov(const Ensemble& e);

/// x ↦ linear · (x − shift).
struct AffineMap {
  Vec shift;
  Mat linear;

  Vec apply(const Vec& x) const { return linear * (x - shift); }
  Vec invert(const Vec& y) const;
  bool is_identity(double tol) const;
};

struct Whitened {
  Ensemble ensemble;
  AffineMap transform;
};

/// Maps the cloud to weighted mean 0 and covariance I with the symmetric
/// inverse square root of the covariance.
Whitened whiten(const Ensemble& e);

/// E‖x‖ᵏ / ((2k)ᵏ (E‖x‖²)^{k/2}); the logconcave moment bound says ≤ 1.
double moment_ratio(const Ensemble& e, int k);

struct TailSmallBall {
  double tail_prob = 0.0;       // P(‖x‖ > t√n)
  double smallball_prob = 0.0;  // P(‖x‖ ≤ ε√n)
  double tail_bound = 0.0;      // e^{−t+1}
  /// −log(tail)/(√n t), the empirical constant in e^{−c√n t}; NaN if tail = 0.
  double paouris_rate = 0.0;
  /// log(smallball)/(√n log ε), the empirical constant in ε^{c√n}; NaN if 0.
  double smallball_rate = 0.0;
};

TailSmallBall tail_and_smallball(const Ensemble& e, double t, double eps);

/// √E(‖X‖ − √n)².
double thin_shell_sigma(const Ensemble& e);

/// P(|⟨x,θ⟩ − E⟨x,θ⟩| > t) for each t in the grid.
std::vector<double> lipschitz_concentration_check(const Ensemble& e, const Vec& direction,
                                                  const std::vector<double>& t_grid);

// ---------------------------------------------------------------------------
// Snapshot files: CSV `x1,...,xn,log_weight` plus a JSON sidecar.
// ---------------------------------------------------------------------------

struct SnapshotMeta {
  std::string kind;
  int n = 0;
  Index count = 0;
  double radius = 0.0;
  std::uint64_t seed = 0;
};

void write_ensemble_csv(std::ostream& out, const Ensemble& e);
Ensemble read_ensemble_csv(std::istream& in);
/// Writes `<stem>.csv` and `<stem>.json`.
void write_snapshot(const std::string& stem, const Ensemble& e, const SnapshotMeta& meta);
std::pair<Ensemble, SnapshotMeta> read_snapshot(const std::string& stem);

}  // namespace sloc
