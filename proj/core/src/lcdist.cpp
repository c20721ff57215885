#include "sloc/lcdist.hpp"

#include "sloc/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sloc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string describe_dim(int n) { return "dimension " + std::to_string(n); }

double resolve_radius(int n, std::optional<double> radius) {
  const double r = radius.value_or(default_truncation_radius(n));
  require(r > 0.0, ErrorCode::argument, "truncation radius must be positive");
  return r;
}

Mat simplex_cov(int n) {
  const double np1 = n + 1.0;
  Mat cov = Mat::Constant(n, n, -1.0);
  cov.diagonal().array() += np1;
  return cov / (np1 * np1 * (np1 + 1.0));
}

Vec json_to_vec(const nlohmann::json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

Mat json_to_mat(const nlohmann::json& j) {
  auto rows = j.get<std::vector<std::vector<double>>>();
  const Index n = static_cast<Index>(rows.size());
  Mat m(n, n);
  for (Index i = 0; i < n; ++i) {
    require(static_cast<Index>(rows[i].size()) == n, ErrorCode::config, "matrix must be square");
    for (Index k = 0; k < n; ++k) m(i, k) = rows[i][k];
  }
  return m;
}

nlohmann::json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Vec row = m.row(i).transpose();
    rows.push_back(vec_to_json(row));
  }
  return rows;
}

// Standard normal restricted to [lo, hi].
double truncated_standard_normal(double lo, double hi, Rng& rng) {
  using boost::math::cdf;
  using boost::math::complement;
  using boost::math::quantile;
  static const boost::math::normal_distribution<double> unit;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  if (hi <= 0.0) return -truncated_standard_normal(-hi, -lo, rng);
  if (lo >= 30.0) {
    // Exponential proposal for the far tail.
    const double rate = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
    for (;;) {
      const double z = lo - std::log(1.0 - uniform(rng)) / rate;
      if (z > hi) continue;
      if (uniform(rng) <= std::exp(-0.5 * (z - rate) * (z - rate))) return z;
    }
  }
  const double tiny = std::numeric_limits<double>::min();
  double z = 0.0;
  if (lo >= 0.0) {
    const double upper = cdf(complement(unit, lo));
    const double lower = std::isinf(hi) ? 0.0 : cdf(complement(unit, hi));
    const double q = std::clamp(lower + uniform(rng) * (upper - lower), tiny, 1.0 - 1e-16);
    z = quantile(complement(unit, q));
  } else {
    const double a = std::isinf(lo) ? 0.0 : cdf(unit, lo);
    const double b = std::isinf(hi) ? 1.0 : cdf(unit, hi);
    const double p = std::clamp(a + uniform(rng) * (b - a), tiny, 1.0 - 1e-16);
    z = quantile(unit, p);
  }
  return std::clamp(z, lo, hi);
}

// Density ∝ exp(c x) on [−h, h].
double exponential_tilt_on_interval(double c, double h, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  if (std::abs(c * h) < 1e-12) return -h + 2.0 * h * u;
  if (c < 0.0) return -exponential_tilt_on_interval(-c, h, rng);
  // Inverse CDF written to stay finite for large c·h.
  return std::clamp(h + std::log(u + (1.0 - u) * std::exp(-2.0 * c * h)) / c, -h, h);
}

}  // namespace

double default_truncation_radius(int n) { return n + 20.0; }

BaseDensity::BaseDensity(int n, double radius, DensityKind kind)
    : n_(n), radius_(radius), kind_(std::move(kind)) {
  require(n >= 1, ErrorCode::argument, "density " + describe_dim(n) + " must be positive");
}

BaseDensity BaseDensity::gaussian(Vec mean, Mat cov, std::optional<double> radius) {
  const int n = static_cast<int>(mean.size());
  require(cov.rows() == n && cov.cols() == n, ErrorCode::argument, "gaussian mean/cov dimension mismatch");
  require(is_symmetric(cov, 1e-10), ErrorCode::argument, "gaussian covariance must be symmetric");
  require(min_eigenvalue(cov) > 0.0, ErrorCode::argument, "gaussian covariance must be positive definite");
  BaseDensity d(n, resolve_radius(n, radius), GaussianKind{mean, symmetrize(cov)});
  Eigen::LLT<Mat> llt(symmetrize(cov));
  require(llt.info() == Eigen::Success, ErrorCode::linear_algebra, "cholesky of covariance failed");
  d.factor_ = llt.matrixL();
  d.inverse_factor_ = llt.solve(Mat::Identity(n, n));  // precision
  return d;
}

BaseDensity BaseDensity::standard_gaussian(int n, std::optional<double> radius) {
  require(n >= 1, ErrorCode::argument, "dimension must be positive");
  return gaussian(Vec::Zero(n), Mat::Identity(n, n), radius);
}

BaseDensity BaseDensity::uniform_box(Vec half_widths, std::optional<double> radius) {
  const int n = static_cast<int>(half_widths.size());
  require(n >= 1 && (half_widths.array() > 0.0).all(), ErrorCode::argument,
          "box half-widths must be positive");
  return BaseDensity(n, resolve_radius(n, radius), UniformBoxKind{std::move(half_widths)});
}

BaseDensity BaseDensity::isotropic_box(int n, std::optional<double> radius) {
  require(n >= 1, ErrorCode::argument, "dimension must be positive");
  return uniform_box(Vec::Constant(n, std::sqrt(3.0)), radius);
}

BaseDensity BaseDensity::product_exponential(int n, std::optional<double> radius) {
  return BaseDensity(n, resolve_radius(n, radius), ProductExponentialKind{});
}

BaseDensity BaseDensity::uniform_simplex(int n, bool isotropic, std::optional<double> radius) {
  BaseDensity d(n, resolve_radius(n, radius), UniformSimplexKind{isotropic});
  d.prepare_simplex();
  return d;
}

void BaseDensity::prepare_simplex() {
  const Mat cov = simplex_cov(n_);
  shift_ = Vec::Constant(n_, 1.0 / (n_ + 1.0));
  factor_ = psd_sqrt(cov);
  inverse_factor_ = psd_pow(cov, -0.5);
}

BaseDensity BaseDensity::custom(int n, std::string name, std::function<Vec(Rng&)> sampler,
                                std::function<double(const Vec&)> log_density, double radius) {
  require(static_cast<bool>(sampler) && static_cast<bool>(log_density), ErrorCode::argument,
          "custom density needs both a sampler and a log-density");
  return BaseDensity(n, resolve_radius(n, radius),
                     CustomKind{std::move(name), std::move(sampler), std::move(log_density)});
}

std::string BaseDensity::kind_name() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKind>) return "gaussian";
        else if constexpr (std::is_same_v<K, UniformBoxKind>) return "uniform_box";
        else if constexpr (std::is_same_v<K, ProductExponentialKind>) return "product_exponential";
        else if constexpr (std::is_same_v<K, UniformSimplexKind>) return "uniform_simplex";
        else return "custom:" + k.name;
      },
      kind_);
}

double BaseDensity::log_density(const Vec& x) const {
  require(x.size() == n_, ErrorCode::argument, "log_density: point has the wrong dimension");
  if (!x.allFinite() || x.norm() > radius_) return kNegInf;
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKind>) {
          const Vec d = x - k.mean;
          return -0.5 * d.dot(inverse_factor_ * d);
        } else if constexpr (std::is_same_v<K, UniformBoxKind>) {
          return (x.array().abs() <= k.half_widths.array()).all() ? 0.0 : kNegInf;
        } else if constexpr (std::is_same_v<K, ProductExponentialKind>) {
          if ((x.array() < -1.0).any()) return kNegInf;
          return -(x.array() + 1.0).sum();
        } else if constexpr (std::is_same_v<K, UniformSimplexKind>) {
          const Vec s = k.isotropic ? Vec(factor_ * x + shift_) : x;
          constexpr double slack = 1e-12;
          return ((s.array() >= -slack).all() && s.sum() <= 1.0 + slack) ? 0.0 : kNegInf;
        } else {
          return k.log_density(x);
        }
      },
      kind_);
}

std::optional<Vec> BaseDensity::analytic_mean() const {
  return std::visit(
      [&](const auto& k) -> std::optional<Vec> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKind>) return k.mean;
        else if constexpr (std::is_same_v<K, UniformSimplexKind>)
          return k.isotropic ? Vec(Vec::Zero(n_)) : shift_;
        else if constexpr (std::is_same_v<K, CustomKind>) return std::nullopt;
        else return Vec(Vec::Zero(n_));
      },
      kind_);
}

std::optional<Mat> BaseDensity::analytic_cov() const {
  return std::visit(
      [&](const auto& k) -> std::optional<Mat> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKind>) return k.cov;
        else if constexpr (std::is_same_v<K, UniformBoxKind>)
          return Mat(k.half_widths.array().square().matrix().asDiagonal()) / 3.0;
        else if constexpr (std::is_same_v<K, ProductExponentialKind>) return Mat(Mat::Identity(n_, n_));
        else if constexpr (std::is_same_v<K, UniformSimplexKind>)
          return k.isotropic ? Mat(Mat::Identity(n_, n_)) : simplex_cov(n_);
        else return std::nullopt;
      },
      kind_);
}

bool BaseDensity::is_isotropic() const {
  auto mean = analytic_mean();
  auto cov = analytic_cov();
  if (!mean || !cov) return false;
  return mean->norm() < 1e-12 && (*cov - Mat::Identity(n_, n_)).norm() < 1e-10;
}

Vec BaseDensity::draw_untruncated(Rng& rng) const {
  return std::visit(
      [&](const auto& k) -> Vec {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKind>) {
          std::normal_distribution<double> normal;
          Vec z(n_);
          for (int i = 0; i < n_; ++i) z(i) = normal(rng);
          return k.mean + factor_ * z;
        } else if constexpr (std::is_same_v<K, UniformBoxKind>) {
          std::uniform_real_distribution<double> uniform(-1.0, 1.0);
          Vec x(n_);
          for (int i = 0; i < n_; ++i) x(i) = k.half_widths(i) * uniform(rng);
          return x;
        } else if constexpr (std::is_same_v<K, ProductExponentialKind>) {
          std::exponential_distribution<double> expo(1.0);
          Vec x(n_);
          for (int i = 0; i < n_; ++i) x(i) = expo(rng) - 1.0;
          return x;
        } else if constexpr (std::is_same_v<K, UniformSimplexKind>) {
          std::exponential_distribution<double> expo(1.0);
          Vec e(n_ + 1);
          for (int i = 0; i <= n_; ++i) e(i) = expo(rng);
          Vec s = e.head(n_) / e.sum();
          return k.isotropic ? Vec(inverse_factor_ * (s - shift_)) : s;
        } else {
          Vec x = k.sampler(rng);
          require(x.size() == n_, ErrorCode::argument, "custom sampler returned the wrong dimension");
          return x;
        }
      },
      kind_);
}

nlohmann::json BaseDensity::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_name();
  j["n"] = n_;
  j["radius"] = radius_;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKind>) {
          j["mean"] = vec_to_json(k.mean);
          j["cov"] = mat_to_json(k.cov);
        } else if constexpr (std::is_same_v<K, UniformBoxKind>) {
          j["half_widths"] = vec_to_json(k.half_widths);
        } else if constexpr (std::is_same_v<K, UniformSimplexKind>) {
          j["isotropic"] = k.isotropic;
        }
      },
      kind_);
  return j;
}

BaseDensity BaseDensity::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::config, "base density must be an object");
  require(j.contains("kind"), ErrorCode::config, "base.kind is required");
  const std::string kind = j.at("kind").get<std::string>();
  std::optional<double> radius;
  if (j.contains("radius")) radius = j.at("radius").get<double>();
  auto dimension = [&]() -> int {
    require(j.contains("n"), ErrorCode::config, "base.n is required for kind " + kind);
    const int n = j.at("n").get<int>();
    require(n >= 1, ErrorCode::config, "base.n must be positive");
    return n;
  };
  if (kind == "gaussian") {
    if (j.contains("mean") || j.contains("cov")) {
      require(j.contains("mean") && j.contains("cov"), ErrorCode::config,
              "gaussian needs both mean and cov (or neither, with n)");
      return gaussian(json_to_vec(j.at("mean")), json_to_mat(j.at("cov")), radius);
    }
    return standard_gaussian(dimension(), radius);
  }
  if (kind == "uniform_box") {
    if (j.contains("half_widths")) return uniform_box(json_to_vec(j.at("half_widths")), radius);
    return isotropic_box(dimension(), radius);
  }
  if (kind == "product_exponential") return product_exponential(dimension(), radius);
  if (kind == "uniform_simplex") return uniform_simplex(dimension(), j.value("isotropic", true), radius);
  fail(ErrorCode::config, "unknown base.kind '" + kind + "'");
}

Vec sample_tilted_box(const Vec& half_widths, const Vec& c, const Vec& b_diag, Rng& rng) {
  const Index n = half_widths.size();
  require(c.size() == n && b_diag.size() == n, ErrorCode::argument, "sample_tilted_box: dimension mismatch");
  Vec x(n);
  for (Index i = 0; i < n; ++i) {
    const double h = half_widths(i);
    const double b = b_diag(i);
    require(b >= 0.0, ErrorCode::argument, "sample_tilted_box: quadratic tilt must be non-negative");
    if (b * h * h < 1e-12) {
      x(i) = exponential_tilt_on_interval(c(i), h, rng);
    } else {
      const double sd = 1.0 / std::sqrt(b);
      const double centre = c(i) / b;
      x(i) = centre + sd * truncated_standard_normal((-h - centre) / sd, (h - centre) / sd, rng);
      x(i) = std::clamp(x(i), -h, h);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------

Ensemble::Ensemble(RowMat points, Vec log_weights)
    : Ensemble(std::make_shared<const RowMat>(std::move(points)), std::move(log_weights)) {}

Ensemble::Ensemble(std::shared_ptr<const RowMat> points, Vec log_weights)
    : points_(std::move(points)), log_weights_(std::move(log_weights)) {
  require(points_ != nullptr && points_->rows() >= 1, ErrorCode::argument, "ensemble needs at least one point");
  require(log_weights_.size() == points_->rows(), ErrorCode::argument,
          "ensemble: one log-weight per point is required");
  normalize();
}

Ensemble Ensemble::uniform(RowMat points) {
  const Index n = points.rows();
  return Ensemble(std::move(points), Vec::Zero(n));
}

Ensemble Ensemble::with_log_weights(Vec log_weights) const { return Ensemble(points_, std::move(log_weights)); }

void Ensemble::normalize() {
  require(!log_weights_.hasNaN(), ErrorCode::degenerate_ensemble, "log-weights contain NaN");
  const double top = log_weights_.maxCoeff();
  require(std::isfinite(top), ErrorCode::degenerate_ensemble, "all weights are zero or infinite");
  weights_ = (log_weights_.array() - top).exp().matrix();
  const double total = weights_.sum();
  log_norm_ = top + std::log(total);
  weights_ /= total;
  ess_ = 1.0 / weights_.squaredNorm();
}

Ensemble sample_base(const BaseDensity& model, Index count, std::uint64_t seed) {
  Rng rng = make_stream(seed, streams::base_sample);
  return sample_base(model, count, rng);
}

Ensemble sample_base(const BaseDensity& model, Index count, Rng& rng) {
  require(count >= 1, ErrorCode::argument, "sample count must be at least 1");
  const int n = model.dim();
  const double radius = model.truncation_radius();
  RowMat points(count, n);
  const Index budget = 100 * count;
  Index proposals = 0;
  for (Index i = 0; i < count;) {
    if (proposals++ >= budget) {
      fail(ErrorCode::sampling_budget, "truncation rejected too many proposals (" + std::to_string(budget) +
                                           " proposals for " + std::to_string(count) + " points)");
    }
    Vec x = model.draw_untruncated(rng);
    if (x.norm() <= radius) points.row(i++) = x.transpose();
  }
  return Ensemble::uniform(std::move(points));
}

Moments weighted_mean_cov(const Ensemble& e) {
  if (e.ess() < 2.0) {
    std::ostringstream msg;
    msg << "effective sample size " << e.ess() << " < 2";
    fail(ErrorCode::degenerate_ensemble, msg.str());
  }
  const RowMat& x = e.points();
  const Vec& w = e.weights();
  Vec mean = x.transpose() * w;
  RowMat centered = x.rowwise() - mean.transpose();
  RowMat scaled = centered.array().colwise() * w.array();
  Mat cov = scaled.transpose() * centered;
  return {std::move(mean), psd_floor(symmetrize(cov))};
}

Vec AffineMap::invert(const Vec& y) const { return linear.lu().solve(y) + shift; }

bool AffineMap::is_identity(double tol) const {
  const Index n = linear.rows();
  return shift.norm() <= tol && (linear - Mat::Identity(n, n)).norm() <= tol;
}

Whitened whiten(const Ensemble& e) {
  Moments m = weighted_mean_cov(e);
  SymEig eig = sym_eig(m.cov);
  const double top = eig.values.maxCoeff();
  if (!(top > 0.0) || eig.values.minCoeff() <= 1e-10 * top) {
    std::ostringstream msg;
    msg << "covariance is singular; null directions:";
    for (Index i = 0; i < eig.values.size(); ++i) {
      if (eig.values(i) <= 1e-10 * std::max(top, 0.0)) {
        msg << " [" << eig.vectors.col(i).transpose() << "]";
      }
    }
    fail(ErrorCode::rank_deficient, msg.str());
  }
  Mat inv_sqrt = spectral_apply(eig, [](double x) { return 1.0 / std::sqrt(x); });
  RowMat centered = e.points().rowwise() - m.mean.transpose();
  RowMat iso = centered * inv_sqrt;  // inv_sqrt is symmetric
  return {Ensemble(std::move(iso), e.log_weights()), AffineMap{m.mean, inv_sqrt}};
}

double moment_ratio(const Ensemble& e, int k) {
  require(k >= 1, ErrorCode::argument, "moment order k must be at least 1");
  const Vec norms = e.points().rowwise().norm();
  const Vec& w = e.weights();
  const double second = w.dot(norms.array().square().matrix());
  require(second > 0.0, ErrorCode::degenerate_ensemble, "E‖x‖² is zero");
  const double kth = w.dot(norms.array().pow(k).matrix());
  return kth / (std::pow(2.0 * k, k) * std::pow(second, 0.5 * k));
}

TailSmallBall tail_and_smallball(const Ensemble& e, double t, double eps) {
  require(t >= 0.0, ErrorCode::argument, "tail level t must be non-negative");
  require(eps > 0.0 && eps <= 1.0, ErrorCode::argument, "small-ball radius must lie in (0, 1]");
  const double root_n = std::sqrt(static_cast<double>(e.dim()));
  const Vec norms = e.points().rowwise().norm();
  const Vec& w = e.weights();
  TailSmallBall out;
  for (Index i = 0; i < norms.size(); ++i) {
    if (norms(i) > t * root_n) out.tail_prob += w(i);
    if (norms(i) <= eps * root_n) out.smallball_prob += w(i);
  }
  out.tail_bound = std::exp(1.0 - t);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.paouris_rate = (out.tail_prob > 0.0 && t > 0.0) ? -std::log(out.tail_prob) / (root_n * t) : nan;
  out.smallball_rate = (out.smallball_prob > 0.0 && eps < 1.0)
                           ? std::log(out.smallball_prob) / (root_n * std::log(eps))
                           : nan;
  return out;
}

double thin_shell_sigma(const Ensemble& e) {
  const double root_n = std::sqrt(static_cast<double>(e.dim()));
  const Vec dev = (e.points().rowwise().norm().array() - root_n).matrix();
  return std::sqrt(e.weights().dot(dev.array().square().matrix()));
}

std::vector<double> lipschitz_concentration_check(const Ensemble& e, const Vec& direction,
                                                  const std::vector<double>& t_grid) {
  require(direction.size() == e.dim(), ErrorCode::argument, "direction has the wrong dimension");
  require(std::abs(direction.norm() - 1.0) < 1e-8, ErrorCode::argument, "direction must be a unit vector");
  const Vec g = e.points() * direction;
  const Vec& w = e.weights();
  const double mean = w.dot(g);
  std::vector<double> freq;
  freq.reserve(t_grid.size());
  for (double t : t_grid) {
    double p = 0.0;
    for (Index i = 0; i < g.size(); ++i) {
      if (std::abs(g(i) - mean) > t) p += w(i);
    }
    freq.push_back(p);
  }
  return freq;
}

}  // namespace sloc
