#include "oracles.hpp"
#include "sloc/error.hpp"
#include "sloc/lcdist.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace sloc;

namespace {

// Mean and standard error of f over a uniformly weighted cloud.
template <class F>
std::pair<double, double> mean_se(const Ensemble& e, F f) {
  double s = 0, s2 = 0;
  const Index n = e.size();
  for (Index i = 0; i < n; ++i) {
    const double v = f(Vec(e.point(i).transpose()));
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt(std::max(0.0, s2 / n - m * m) / n)};
}

Ensemble line(std::initializer_list<double> xs) {
  RowMat p(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) p(i++, 0) = x;
  return Ensemble::uniform(p);
}

}  // namespace

TEST(BaseDensity, SamplesStayInsideRadius) {
  const auto model = BaseDensity::standard_gaussian(3, 2.0);
  const Ensemble e = sample_base(model, 2000, 1);
  for (Index i = 0; i < e.size(); ++i) EXPECT_LE(e.point(i).norm(), 2.0);
}

TEST(BaseDensity, LogDensityInfiniteOutsideSupport) {
  const auto box = BaseDensity::isotropic_box(2);
  EXPECT_TRUE(std::isfinite(box.log_density(Vec::Zero(2))));
  EXPECT_EQ(box.log_density(Vec::Constant(2, 2.0)), -INFINITY);
  const auto g = BaseDensity::standard_gaussian(2, 3.0);
  EXPECT_EQ(g.log_density(Vec::Constant(2, 3.0)), -INFINITY);
  const auto ex = BaseDensity::product_exponential(2);
  EXPECT_EQ(ex.log_density(Vec::Constant(2, -1.5)), -INFINITY);
}

TEST(BaseDensity, BuiltinsAreIsotropic) {
  for (const auto& m : {BaseDensity::standard_gaussian(3), BaseDensity::isotropic_box(3),
                        BaseDensity::product_exponential(3), BaseDensity::uniform_simplex(3)}) {
    EXPECT_TRUE(m.is_isotropic()) << m.kind_name();
    EXPECT_LT(m.analytic_mean()->norm(), 1e-12);
    EXPECT_LT((*m.analytic_cov() - Mat::Identity(3, 3)).norm(), 1e-12);
  }
}

TEST(BaseDensity, SimplexSampleHasIdentityCovariance) {
  const Ensemble e = sample_base(BaseDensity::uniform_simplex(3), 100000, 4);
  const Moments m = weighted_mean_cov(e);
  EXPECT_LT(m.mean.norm(), 0.02);
  EXPECT_LT((m.cov - Mat::Identity(3, 3)).norm(), 0.05);
}

TEST(BaseDensity, JsonRoundTrip) {
  Vec h(2);
  h << 1.0, 2.5;
  const auto box = BaseDensity::uniform_box(h, 4.0);
  const auto back = BaseDensity::from_json(box.to_json());
  EXPECT_EQ(back.kind_name(), box.kind_name());
  EXPECT_EQ(back.dim(), 2);
  EXPECT_DOUBLE_EQ(back.truncation_radius(), 4.0);
  EXPECT_EQ(back.to_json(), box.to_json());
}

TEST(BaseDensity, CustomSamplerOverBudget) {
  // Every proposal lies outside the radius.
  auto model = BaseDensity::custom(
      1, "far", [](Rng&) { return Vec::Constant(1, 10.0); }, [](const Vec&) { return 0.0; }, 1.0);
  try {
    sample_base(model, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::sampling_budget);
  }
}

TEST(SampleBase, UniformWeights) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(2), 4, 7);
  ASSERT_EQ(e.size(), 4);
  for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(e.weights()(i), 0.25);
  EXPECT_DOUBLE_EQ(e.ess(), 4.0);
}

TEST(SampleBase, Deterministic) {
  const auto m = BaseDensity::product_exponential(3);
  EXPECT_EQ(sample_base(m, 50, 9).points(), sample_base(m, 50, 9).points());
  EXPECT_NE(sample_base(m, 50, 9).points(), sample_base(m, 50, 10).points());
}

TEST(SampleBase, BoxCovarianceIsIdentity) {
  const Ensemble e = sample_base(BaseDensity::isotropic_box(2), 100000, 3);
  // Var(U²) for U uniform on ±√3 is 9/5 − 1 = 4/5.
  for (int i = 0; i < 2; ++i) {
    auto [m, se] = mean_se(e, [i](const Vec& x) { return x(i) * x(i); });
    EXPECT_NEAR(m, 1.0, 3 * se);
  }
  auto [c, se] = mean_se(e, [](const Vec& x) { return x(0) * x(1); });
  EXPECT_NEAR(c, 0.0, 3 * se);
}

TEST(SampleBase, ExponentialThirdMoment) {
  const Ensemble e = sample_base(BaseDensity::product_exponential(1), 1000000, 5);
  auto [m, se] = mean_se(e, [](const Vec& x) { return x(0) * x(0) * x(0); });
  EXPECT_NEAR(m, 2.0, 0.02);
  (void)se;
}

TEST(SampleTiltedBox, TruncatedNormalMoments) {
  // N(0.5, 1) restricted to [−1.5, 1.5].
  Rng rng = make_stream(21);
  Vec h = Vec::Constant(1, 1.5), c = Vec::Constant(1, 0.5), b = Vec::Constant(1, 1.0);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = sample_tilted_box(h, c, b, rng)(0);
    ASSERT_LE(std::abs(x), 1.5);
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.270362820908671, 3 * std::sqrt(0.5197625392115339 / n));
  EXPECT_NEAR(var, 0.5197625392115339, 0.01);
}

TEST(SampleTiltedBox, SharpTiltPilesAtEdge) {
  Rng rng = make_stream(22);
  Vec h = Vec::Constant(1, 1.0), c = Vec::Constant(1, -30.5), b = Vec::Constant(1, 1.0);
  double s = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) s += sample_tilted_box(h, c, b, rng)(0);
  EXPECT_NEAR(s / n, -0.9661791558291632, 3 * std::sqrt(0.001141247459887862 / n));
}

TEST(SampleTiltedBox, PureExponentialTilt) {
  Rng rng = make_stream(23);
  Vec h = Vec::Constant(1, 1.0), c = Vec::Constant(1, 2.0), b = Vec::Zero(1);
  double s = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += sample_tilted_box(h, c, b, rng)(0);
  EXPECT_NEAR(s / n, 0.5373147207275479, 0.006);
}

TEST(Ensemble, WeightsNormalizedAndEssBounded) {
  Rng rng = make_stream(31);
  std::normal_distribution<double> z;
  RowMat p(100, 2);
  Vec lw(100);
  for (Index i = 0; i < 100; ++i) {
    p(i, 0) = z(rng);
    p(i, 1) = z(rng);
    lw(i) = 5 * z(rng) + 400;
  }
  const Ensemble e(p, lw);
  EXPECT_NEAR(e.weights().sum(), 1.0, 1e-12);
  EXPECT_GE(e.weights().minCoeff(), 0.0);
  EXPECT_GE(e.ess(), 1.0);
  EXPECT_LE(e.ess(), 100.0);
}

TEST(Ensemble, AllZeroWeightsRejected) {
  RowMat p = RowMat::Zero(3, 1);
  EXPECT_THROW(Ensemble(p, Vec::Constant(3, -INFINITY)), Error);
}

TEST(MeanCov, TwoPoints) {
  const Moments m = weighted_mean_cov(line({-1.0, 1.0}));
  EXPECT_NEAR(m.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(m.cov(0, 0), 1.0, 1e-15);
}

TEST(MeanCov, RepeatedPoint) {
  RowMat p(3, 2);
  p.rowwise() = Eigen::RowVector2d(0.3, -2.0);
  Vec lw(3);
  lw << 0.0, -0.5, 0.5;
  const Moments m = weighted_mean_cov(Ensemble(p, lw));
  EXPECT_LT(m.cov.norm(), 1e-14);
}

TEST(MeanCov, RequiresTwoEffectivePoints) {
  RowMat p(2, 1);
  p << 0.0, 1.0;
  Vec lw(2);
  lw << 0.0, -1000.0;
  try {
    weighted_mean_cov(Ensemble(p, lw));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_ensemble);
  }
}

TEST(MeanCov, GaussianOperatorNorm) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(8), 100000, 2);
  const Moments m = weighted_mean_cov(e);
  EXPECT_LT(op_norm(m.cov - Mat::Identity(8, 8)), 0.05);
  EXPECT_TRUE(is_symmetric(m.cov));
  EXPECT_GE(min_eigenvalue(m.cov), 0.0);
}

TEST(Whiten, ScalesVarianceFour) {
  const Whitened w = whiten(line({-2.0, 2.0}));
  EXPECT_NEAR(w.transform.linear(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(w.ensemble.point(0)(0), -1.0, 1e-12);
}

TEST(Whiten, AnisotropicToIdentity) {
  Mat cov(3, 3);
  cov << 4, 1, 0, 1, 2, 0.5, 0, 0.5, 9;
  Vec mean(3);
  mean << 1, -2, 3;
  const Ensemble e = sample_base(BaseDensity::gaussian(mean, cov), 5000, 8);
  const Whitened w = whiten(e);
  const Moments m = weighted_mean_cov(w.ensemble);
  EXPECT_LT(m.mean.norm(), 1e-10);
  EXPECT_LT((m.cov - Mat::Identity(3, 3)).norm(), 1e-10);
  const Vec x = e.point(17).transpose();
  EXPECT_LT((w.transform.invert(w.transform.apply(x)) - x).norm(), 1e-10);
}

TEST(Whiten, SecondPassIsIdentity) {
  const Ensemble e = sample_base(BaseDensity::product_exponential(4), 3000, 9);
  const Whitened once = whiten(e);
  EXPECT_TRUE(whiten(once.ensemble).transform.is_identity(1e-9));
}

TEST(Whiten, SingularCovariance) {
  RowMat p(4, 2);
  p << 0, 0, 1, 1, 2, 2, 3, 3;
  try {
    whiten(Ensemble::uniform(p));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::rank_deficient);
  }
}

TEST(MomentRatio, SecondOrderCancels) {
  const Ensemble e = sample_base(BaseDensity::product_exponential(3), 500, 1);
  EXPECT_NEAR(moment_ratio(e, 2), 1.0 / 16.0, 1e-15);
}

TEST(MomentRatio, GaussianFourth) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(1), 200000, 2);
  EXPECT_NEAR(moment_ratio(e, 4), 3.0 / 4096.0, 0.05 * 3.0 / 4096.0);
}

TEST(MomentRatio, CenteredExponentialThird) {
  // E|Exp(1) − 1|³ = 12/e − 2.
  const Ensemble e = sample_base(BaseDensity::product_exponential(1), 200000, 3);
  EXPECT_NEAR(moment_ratio(e, 3), 2.414553294057308 / 216.0, 0.05 * 2.414553294057308 / 216.0);
}

TEST(MomentRatio, BoundedForEveryBuiltin) {
  for (const auto& m : {BaseDensity::standard_gaussian(4), BaseDensity::isotropic_box(4),
                        BaseDensity::product_exponential(4), BaseDensity::uniform_simplex(4)}) {
    const Ensemble e = sample_base(m, 100000, 4);
    for (int k = 1; k <= 8; ++k) EXPECT_LE(moment_ratio(e, k), 1.0) << m.kind_name() << " k=" << k;
  }
}

TEST(TailSmallBall, ZeroLevelAndPartition) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(5), 2000, 5);
  EXPECT_NEAR(tail_and_smallball(e, 0.0, 0.5).tail_prob, 1.0, 1e-12);
  const auto r = tail_and_smallball(e, 1.0, 1.0);
  EXPECT_NEAR(r.tail_prob + r.smallball_prob, 1.0, 1e-12);
}

TEST(TailSmallBall, ChiSquareTail) {
  // P(χ²₁₆ > 64) ≈ 1.09e-7: nothing should land out there in 10⁵ draws.
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(16), 100000, 6);
  const auto r = tail_and_smallball(e, 2.0, 0.1);
  EXPECT_EQ(r.tail_prob, 0.0);
  EXPECT_TRUE(std::isnan(r.paouris_rate));
  EXPECT_NEAR(r.tail_bound, std::exp(-1.0), 1e-15);
}

TEST(ThinShell, PointMassOnSphere) {
  RowMat p(2, 4);
  p.row(0) << 2, 0, 0, 0;
  p.row(1) << 0, 0, 0, -2;
  EXPECT_NEAR(thin_shell_sigma(Ensemble::uniform(p)), 0.0, 1e-15);
}

TEST(ThinShell, GaussianMatchesChiMoments) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(16), 100000, 7);
  const double sigma = thin_shell_sigma(e);
  auto [s2, se2] = mean_se(e, [](const Vec& x) { return std::pow(x.norm() - 4.0, 2); });
  EXPECT_NEAR(sigma, 0.704127136887501, 2 * se2 / (2 * sigma));
}

TEST(ThinShell, BoxMatchesQuadrature) {
  const Ensemble e = sample_base(BaseDensity::isotropic_box(8), 100000, 8);
  const double sigma = thin_shell_sigma(e);
  auto [s2, se2] = mean_se(e, [](const Vec& x) { return std::pow(x.norm() - std::sqrt(8.0), 2); });
  EXPECT_NEAR(sigma, 0.461310964584752, 2 * se2 / (2 * sigma));
}

TEST(Concentration, GaussianTail) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(2), 400000, 9);
  const auto f = lipschitz_concentration_check(e, Vec::Unit(2, 0), {0.0, 3.0});
  EXPECT_LE(f[0], 1.0 + 1e-9);  // summation error over 4e5 weights
  const double p = 2 * (1 - oracle::normal_cdf(3.0));
  EXPECT_NEAR(f[1], p, 3 * std::sqrt(p * (1 - p) / 400000));
}

TEST(Concentration, ExponentialLogLinear) {
  const Ensemble e = sample_base(BaseDensity::product_exponential(2), 200000, 10);
  const auto f = lipschitz_concentration_check(e, Vec::Unit(2, 1), {1.0, 2.0, 4.0});
  const double s1 = std::log(f[1]) - std::log(f[0]), s2 = (std::log(f[2]) - std::log(f[1])) / 2;
  EXPECT_LT(s1, 0.0);
  EXPECT_LT(s2, 0.0);
  // Beyond t = 1 only the right tail counts, with slope exactly −1.
  EXPECT_NEAR(s2, -1.0, 0.1);
}

TEST(Snapshot, CsvRoundTrip) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(3), 20, 11);
  const Ensemble t(e.shared_points(), Vec::LinSpaced(20, -1.0, 1.0));
  std::stringstream ss;
  write_ensemble_csv(ss, t);
  EXPECT_EQ(ss.str().rfind("x1,x2,x3,log_weight\n", 0), 0u);
  const Ensemble back = read_ensemble_csv(ss);
  EXPECT_LT((back.points() - t.points()).norm(), 1e-12);
  EXPECT_LT((back.weights() - t.weights()).norm(), 1e-12);
}

TEST(Snapshot, FilesWithSidecar) {
  const auto dir = std::filesystem::temp_directory_path() / "sloc_snapshot_test";
  std::filesystem::create_directories(dir);
  const Ensemble e = sample_base(BaseDensity::isotropic_box(2), 10, 12);
  write_snapshot((dir / "snap").string(), e, {"uniform_box", 2, 10, 22.0, 12});
  auto [back, meta] = read_snapshot((dir / "snap").string());
  EXPECT_EQ(meta.kind, "uniform_box");
  EXPECT_EQ(meta.count, 10);
  EXPECT_EQ(meta.seed, 12u);
  EXPECT_LT((back.points() - e.points()).norm(), 1e-12);
  std::filesystem::remove_all(dir);
}
