#include "oracles.hpp"
#include "sloc/error.hpp"
#include "sloc/linalg.hpp"
#include "sloc/rng.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sloc;

namespace {

Mat random_sym(Index n, Rng& rng) {
  std::normal_distribution<double> z;
  Mat g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = z(rng);
  return 0.5 * (g + g.transpose());
}

Mat random_pd(Index n, Rng& rng) {
  std::normal_distribution<double> z;
  Mat g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = z(rng);
  return g.transpose() * g + 0.1 * Mat::Identity(n, n);
}

}  // namespace

TEST(Linalg, EigenvaluesMatchJacobi) {
  Rng rng = make_stream(11);
  for (Index n : {1, 2, 5, 9}) {
    const Mat m = random_sym(n, rng);
    const auto ref = oracle::jacobi_eigenvalues(m);
    const SymEig e = sym_eig(m);
    for (Index i = 0; i < n; ++i) EXPECT_NEAR(e.values(i), ref[i], 1e-10);
  }
}

TEST(Linalg, SqrtMatchesDenmanBeavers) {
  Rng rng = make_stream(12);
  const Mat a = random_pd(6, rng);
  EXPECT_LT((psd_sqrt(a) - oracle::db_sqrt(a)).norm(), 1e-9 * a.norm());
}

TEST(Linalg, IntegerPowersMatchProducts) {
  Rng rng = make_stream(13);
  const Mat a = random_pd(4, rng) / 5.0;
  for (int k : {0, 1, 2, 3}) EXPECT_LT((psd_pow(a, k) - oracle::mat_power(a, k)).norm(), 1e-10 * (1 + a.norm()));
  const Mat m = random_sym(4, rng);
  EXPECT_NEAR(trace_power(m, 3), oracle::mat_power(m, 3).trace(), 1e-10);
}

TEST(Linalg, AbsIsIdempotentOnPsd) {
  Rng rng = make_stream(14);
  const Mat a = random_pd(5, rng);
  EXPECT_LT((sym_abs(a) - a).norm(), 1e-12 * a.norm() * 10);
  const Mat m = random_sym(5, rng);
  EXPECT_LT((sym_abs(m) * sym_abs(m) - m * m).norm(), 1e-10 * (m * m).norm());
}

TEST(Linalg, AbsOfDiagonal) {
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -3.0;
  const Mat a = sym_abs(d);
  EXPECT_NEAR(a(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(a(1, 1), 3.0, 1e-14);
}

TEST(Linalg, PseudoinverseOfRankDeficient) {
  Mat m = Mat::Zero(3, 3);
  m(0, 0) = 2.0;
  m(1, 1) = 4.0;
  const Mat p = sym_pinv(m);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(p(1, 1), 0.25, 1e-14);
  EXPECT_EQ(p(2, 2), 0.0);
  EXPECT_EQ(numerical_rank(m), 2);
  EXPECT_LT((m * p * m - m).norm(), 1e-12);
}

TEST(Linalg, PowerZeroIsIdentityEvenWhenSingular) {
  const Mat z = Mat::Zero(3, 3);
  EXPECT_LT((psd_pow(z, 0.0) - Mat::Identity(3, 3)).norm(), 1e-15);
}

TEST(Linalg, NegativeEigenvaluesFloored) {
  Mat m(2, 2);
  m << 1, 2, 2, 1;  // eigenvalues 3, -1
  EXPECT_NEAR(min_eigenvalue(psd_floor(m)), 0.0, 1e-14);
  EXPECT_NEAR(max_eigenvalue(psd_floor(m)), 3.0, 1e-14);
  EXPECT_NEAR(sym_op_norm(m), 3.0, 1e-14);
}

TEST(Linalg, SymmetryCheck) {
  Mat m(2, 2);
  m << 1, 2, 2.0000001, 1;
  EXPECT_FALSE(is_symmetric(m));
  EXPECT_TRUE(is_symmetric(symmetrize(m)));
}

TEST(Linalg, OperatorNormOfGeneralMatrix) {
  Mat m(2, 2);
  m << 0, 2, 0, 0;
  EXPECT_NEAR(op_norm(m), 2.0, 1e-14);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = make_stream(5, 1), b = make_stream(5, 1), c = make_stream(5, 2), d = make_stream(6, 1);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}

TEST(Error, NumericalClassification) {
  EXPECT_TRUE(Error(ErrorCode::degenerate_tilt, "x").is_numerical());
  EXPECT_TRUE(Error(ErrorCode::integrator_fault, "x").is_numerical());
  EXPECT_FALSE(Error(ErrorCode::config, "x").is_numerical());
  EXPECT_FALSE(Error(ErrorCode::argument, "x").is_numerical());
  EXPECT_NE(std::string(Error(ErrorCode::not_psd, "bad").what()).find("bad"), std::string::npos);
}
