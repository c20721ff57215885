#include "oracles.hpp"
#include "sloc/error.hpp"
#include "sloc/isoperimetry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace sloc;

namespace {

constexpr double kHalfNormalExpansion = 0.7978845608028654;  // 2·φ(0)

Ensemble gaussian_1d(double sigma, Index N, std::uint64_t seed) {
  return sample_base(BaseDensity::gaussian(Vec::Zero(1), Mat::Constant(1, 1, sigma * sigma)), N, seed);
}

}  // namespace

TEST(HalfspaceCut, GaussianAtMedian) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(3), 100000, 1);
  const Vec d = Vec::Ones(3).normalized();
  const auto c = halfspace_cut(e, d, 0.0);
  EXPECT_NEAR(c.boundary_density, oracle::normal_pdf(0.0), 0.05 * oracle::normal_pdf(0.0));
  EXPECT_NEAR(c.min_side_measure, 0.5, 3 * std::sqrt(0.25 / 100000));
  EXPECT_NEAR(c.expansion, kHalfNormalExpansion, 0.05 * kHalfNormalExpansion);
  EXPECT_GT(c.bandwidth, 0.0);
  EXPECT_GT(c.expansion_se, 0.0);
}

TEST(HalfspaceCut, UniformBox) {
  const Ensemble e = sample_base(BaseDensity::isotropic_box(1), 100000, 2);
  const auto c = halfspace_cut(e, Vec::Ones(1), 0.0);
  EXPECT_NEAR(c.boundary_density, 1 / (2 * std::sqrt(3.0)), 0.05 / (2 * std::sqrt(3.0)));
  EXPECT_NEAR(c.expansion, 1 / std::sqrt(3.0), 0.05 / std::sqrt(3.0));
}

TEST(HalfspaceCut, InvariantsAndErrors) {
  const Ensemble e = sample_base(BaseDensity::product_exponential(2), 2000, 3);
  for (double off : {-0.5, 0.0, 1.0, 3.0}) {
    const auto c = halfspace_cut(e, Vec::Unit(2, 0), off);
    EXPECT_GT(c.min_side_measure, 0.0);
    EXPECT_LE(c.min_side_measure, 0.5);
    EXPECT_GE(c.expansion, 0.0);
  }
  try {
    halfspace_cut(e, Vec::Unit(2, 0), 100.0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::extrapolation);
  }
  EXPECT_THROW(halfspace_cut(e, Vec::Ones(2), 0.0), Error);
}

TEST(HalfspaceCut, ScalesInverselyWithSigma) {
  double base = 0;
  for (double sigma : {1.0, 0.5, 2.0}) {
    const auto c = halfspace_cut(gaussian_1d(sigma, 100000, 4), Vec::Ones(1), 0.0);
    if (sigma == 1.0) base = c.expansion;
    EXPECT_NEAR(c.expansion * sigma, base, 0.05 * base) << sigma;
  }
}

TEST(WeightedMedian, RespectsWeights) {
  RowMat p(3, 1);
  p << 0.0, 1.0, 2.0;
  Vec lw(3);
  lw << std::log(0.2), std::log(0.2), std::log(0.6);
  EXPECT_EQ(weighted_median(Ensemble(p, lw), Vec::Ones(1)), 2.0);
  EXPECT_EQ(weighted_median(Ensemble::uniform(p), Vec::Ones(1)), 1.0);
}

TEST(BestExpansion, RotationInvariantForGaussian) {
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(3), 50000, 5);
  const auto best = best_halfspace_expansion(e, 50, 6);
  ASSERT_EQ(best.cuts.size(), 56u);
  double lo = INFINITY, hi = -INFINITY, se = 0;
  for (const auto& c : best.cuts) {
    lo = std::min(lo, c.expansion);
    hi = std::max(hi, c.expansion);
    se = std::max(se, c.expansion_se);
  }
  // Range of 56 near-normal estimates stays within a handful of SE.
  EXPECT_LT(hi - lo, 6 * se + 0.02);
  EXPECT_NEAR(best.psi_estimate, 1.0 / best.worst.expansion, 1e-15);
}

TEST(BestExpansion, AnisotropicWorstDirection) {
  Mat cov = Mat::Identity(2, 2);
  cov(1, 1) = 25;
  const Ensemble e = sample_base(BaseDensity::gaussian(Vec::Zero(2), cov), 100000, 7);
  const auto best = best_halfspace_expansion(e, 8, 8);
  EXPECT_GT(std::abs(best.worst.direction(1)), 0.99);
  EXPECT_NEAR(best.worst.expansion, kHalfNormalExpansion / 5, 0.05 * kHalfNormalExpansion / 5);
}

TEST(BestExpansion, DeterministicAndCsv) {
  const Ensemble e = sample_base(BaseDensity::isotropic_box(2), 3000, 9);
  const auto a = best_halfspace_expansion(e, 1, 3), b = best_halfspace_expansion(e, 1, 3);
  EXPECT_EQ(a.worst.expansion, b.worst.expansion);
  EXPECT_EQ(a.cuts.back().direction, b.cuts.back().direction);
  std::ostringstream csv;
  write_cuts_csv(csv, a);
  EXPECT_EQ(csv.str().rfind("direction_id,offset,boundary_density,min_side,expansion\n", 0), 0u);
  EXPECT_TRUE(to_json(a).contains("psi_estimate"));
  EXPECT_THROW(best_halfspace_expansion(e, 0, 1), Error);
}

TEST(GaussianFactor, BoxTiltMatchesQuadrature) {
  // Expansion at the median of U(−√3, √3)·e^{−t x²/2}, by quadrature.
  const std::pair<double, double> cases[] = {{1.0, 0.87035}, {4.0, 1.59662}, {16.0, 3.19154}};
  const auto base = BaseDensity::isotropic_box(1);
  const Ensemble e = sample_base(base, 100000, 10);
  for (auto [t, expect] : cases) {
    const Mat B = Mat::Constant(1, 1, t);
    const Ensemble tilted = e.with_log_weights(e.log_weights() - 0.5 * t * e.points().col(0).array().square().matrix());
    const auto g = gaussian_factor_expansion(base, B, tilted);
    EXPECT_NEAR(g.measured_expansion, expect, 0.05 * expect) << t;
    EXPECT_NEAR(g.bound, std::sqrt(t), 1e-12);
    EXPECT_TRUE(g.passes);
  }
}

TEST(GaussianFactor, GaussianBase) {
  const auto base = BaseDensity::standard_gaussian(2);
  const Ensemble e = sample_base(base, 100000, 11);
  const Mat B = Mat::Identity(2, 2);
  const Ensemble tilted = e.with_log_weights(-0.5 * e.points().rowwise().squaredNorm());
  const auto g = gaussian_factor_expansion(base, B, tilted);
  EXPECT_NEAR(g.measured_expansion, kHalfNormalExpansion * std::sqrt(2.0), 0.06 * kHalfNormalExpansion * std::sqrt(2.0));
  EXPECT_THROW(gaussian_factor_expansion(base, Mat::Zero(2, 2), tilted), Error);
}

TEST(Poincare, GaussianQuadraticForms) {
  const int n = 4;
  const Ensemble e = sample_base(BaseDensity::standard_gaussian(n), 200000, 12);
  Mat e11 = Mat::Zero(n, n);
  e11(0, 0) = 1;
  const auto r1 = poincare_ratio(e, e11);
  EXPECT_NEAR(r1.ratio, 2.0, 0.05);
  EXPECT_EQ(r1.rank, 1);
  const auto r4 = poincare_ratio(e, Mat::Identity(n, n));
  EXPECT_NEAR(r4.ratio, 2.0, 0.05);
  EXPECT_EQ(r4.rank, n);
  EXPECT_NEAR(r4.psi_sq, 2.0, 1e-12);  // ψ₄ = 4^{1/4}
  try {
    poincare_ratio(e, Mat::Zero(n, n));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::trivial_form);
  }
}

TEST(Kls, ZeroIterations) {
  const auto t = kls_recursion(2.0, 0.25, 1e4, 0);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_NEAR(std::exp(t.rows[0].log_bound), 2.0 * std::pow(1e4, 0.25), 1e-10);
}

TEST(Kls, FrozenRows) {
  const auto t = kls_recursion(1.0, 0.5, 1e6, 3);
  EXPECT_DOUBLE_EQ(t.rows[1].beta, 31.0 / 64.0);
  const double expect_log_alpha[] = {0.0, 3.0457639086378687, 6.1074021664330275, 9.1844109950053266};
  const double expect_beta[] = {0.5, 0.484375, 0.4697113037109375, 0.45592200940882321};
  const double expect_bound[] = {6.9077552789821371, 9.7376518351518139, 12.596703642046648, 15.483206329601211};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(t.rows[i].log_alpha, expect_log_alpha[i], 1e-12);
    EXPECT_NEAR(t.rows[i].beta, expect_beta[i], 1e-15);
    EXPECT_NEAR(t.rows[i].log_bound, expect_bound[i], 1e-12);
  }
  EXPECT_EQ(t.best_ell, 1);
}

TEST(Kls, LongRunEnvelope) {
  const auto t = kls_recursion(1.0, 0.5, 1e300, 10000, 0.01);
  EXPECT_EQ(t.rows.size(), 10001u);
  EXPECT_TRUE(t.beta_decreasing);
  EXPECT_TRUE(t.beta_within_16_over_ell);
  EXPECT_TRUE(t.unimodal);
  EXPECT_EQ(t.best_ell, 74);
  EXPECT_NEAR(t.best_log_bound, 158.95443065466896, 1e-9);
  EXPECT_NEAR(t.rows.back().beta, 0.0015939804466565268, 1e-15);
}

TEST(Kls, Preconditions) {
  EXPECT_THROW(kls_recursion(1.0, 0.6, 100, 1), Error);
  EXPECT_THROW(kls_recursion(0.5, 0.5, 100, 1), Error);
  EXPECT_THROW(kls_recursion(1.0, 0.5, 2, 1), Error);
}

TEST(Unimodal, Shapes) {
  EXPECT_TRUE(is_unimodal({3, 2, 2, 5}));
  EXPECT_TRUE(is_unimodal({1, 2, 3}));
  EXPECT_TRUE(is_unimodal({}));
  EXPECT_FALSE(is_unimodal({1, 3, 2}));
  EXPECT_FALSE(is_unimodal({3, 1, 2, 1}));
}
