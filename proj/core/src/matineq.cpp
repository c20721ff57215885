#include "sloc/matineq.hpp"

#include "sloc/error.hpp"

#include <algorithm>
#include <cmath>

namespace sloc {

SymMatrix::SymMatrix(const Mat& m) {
  require(m.rows() == m.cols(), ErrorCode::argument, "SymMatrix must be square");
  require((m - m.transpose()).norm() <= 1e-12 * m.norm(), ErrorCode::argument, "matrix is not symmetric");
  m_ = symmetrize(m);
}

double Sides::relative_violation() const {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::max(0.0, lhs - rhs) / scale;
}

namespace {

void require_psd(const Mat& m, const char* what) {
  require(m.rows() == m.cols(), ErrorCode::argument, std::string(what) + " must be square");
  if (m.size() == 0) return;
  if (min_eigenvalue(m) < -1e-10 * std::max(1.0, sym_op_norm(m))) {
    fail(ErrorCode::not_psd, std::string(what) + " has a negative eigenvalue");
  }
}

Mat gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Mat g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

Mat random_sym(Index n, Rng& rng) {
  const Mat g = gaussian_matrix(n, n, rng);
  return 0.5 * (g + g.transpose());
}

Mat random_psd(Index n, Rng& rng) {
  const Mat g = gaussian_matrix(n, n, rng);
  return symmetrize(g.transpose() * g);
}

Mat random_projector(Index n, Rng& rng) {
  std::uniform_int_distribution<Index> pick(0, n);
  const Index k = pick(rng);
  if (k == 0) return Mat::Zero(n, n);
  const Mat g = gaussian_matrix(n, k, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  const Mat q = qr.householderQ() * Mat::Identity(n, k);
  return symmetrize(q * q.transpose());
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Sides trace_holder(const SymMatrix& A, const SymMatrix& B, double s, double t) {
  require(A.dim() == B.dim(), ErrorCode::argument, "trace_holder: dimension mismatch");
  require(s >= 1.0 && t >= 1.0, ErrorCode::argument, "trace_holder: exponents must be at least 1");
  require(std::abs(1.0 / s + 1.0 / t - 1.0) <= 1e-12, ErrorCode::argument,
          "trace_holder: exponents must satisfy 1/s + 1/t = 1");
  Sides out;
  out.lhs = (A.mat() * B.mat()).trace();
  auto schatten = [](const SymMatrix& m, double p) {
    if (std::isinf(p)) return sym_op_norm(m.mat());
    return std::pow(m.abs_pow(p).trace(), 1.0 / p);
  };
  out.rhs = schatten(A, s) * schatten(B, t);
  return out;
}

Sides lieb_thirring(const Mat& A, const Mat& B, double r) {
  require(A.rows() == B.rows() && A.cols() == B.cols(), ErrorCode::argument, "lieb_thirring: dimension mismatch");
  require(r >= 1.0, ErrorCode::argument, "lieb_thirring: r must be at least 1");
  require_psd(A, "A");
  require_psd(B, "B");
  const Mat bh = psd_sqrt(B);
  const Mat br2 = psd_pow(B, 0.5 * r);
  Sides out;
  out.lhs = psd_pow(symmetrize(bh * A * bh), r).trace();
  out.rhs = (br2 * psd_pow(A, r) * br2).trace();
  return out;
}

Sides eldan_lieb(const Mat& A, const SymMatrix& B, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::argument, "eldan_lieb: alpha must lie in [0, 1]");
  require(A.rows() == B.dim() && A.cols() == B.dim(), ErrorCode::argument, "eldan_lieb: dimension mismatch");
  require_psd(A, "A");
  const Mat& b = B.mat();
  Sides out;
  out.lhs = (psd_pow(A, alpha) * b * psd_pow(A, 1.0 - alpha) * b).trace();
  out.rhs = (A * b * b).trace();
  return out;
}

ProjectedInverse projected_inverse_limit(const Mat& A, const Mat& P) {
  const Index n = A.rows();
  require(A.cols() == n && P.rows() == n && P.cols() == n, ErrorCode::argument,
          "projected_inverse_limit: dimension mismatch");
  require((P - P.transpose()).norm() <= 1e-10 && (P * P - P).norm() <= 1e-10, ErrorCode::argument,
          "P must be a symmetric idempotent");
  const double a_norm = sym_op_norm(A);
  require(a_norm > 0.0 && min_eigenvalue(A) > 1e-12 * a_norm, ErrorCode::argument, "A must be positive definite");

  const Mat I = Mat::Identity(n, n);
  ProjectedInverse out;
  // Cutoff relative to ‖A‖: when P = I the projected matrix is pure roundoff.
  const SymEig proj = sym_eig((I - P) * A * (I - P));
  const double cutoff = 1e-10 * a_norm;
  out.T = symmetrize(spectral_apply(proj, [cutoff](double x) { return std::abs(x) > cutoff ? 1.0 / x : 0.0; }));

  const SymEig ep = sym_eig(P);
  for (Index i = 0; i < n; ++i) {
    if (ep.values(i) > 0.5) out.nullspace_residual = std::max(out.nullspace_residual, (out.T * ep.vectors.col(i)).norm());
  }
  out.nullspace_ok = out.nullspace_residual <= 1e-9;

  out.finite_s = 1e8 * a_norm;
  const Mat shifted = symmetrize(A + out.finite_s * P);
  Eigen::LLT<Mat> llt(shifted);
  require(llt.info() == Eigen::Success, ErrorCode::linear_algebra, "A + sP is not positive definite");
  const Mat inv = llt.solve(I);
  out.finite_s_error = op_norm(inv - out.T);
  out.finite_s_tolerance = 10.0 * a_norm * a_norm / out.finite_s;
  out.finite_s_ok = out.finite_s_error <= out.finite_s_tolerance;
  const double growth = 1.0 + op_norm(out.T) * a_norm;
  out.finite_s_tolerance_scaled = 10.0 * growth * growth / out.finite_s;
  out.finite_s_ok_scaled = out.finite_s_error <= out.finite_s_tolerance_scaled;
  return out;
}

RandomMatrixStream::RandomMatrixStream(InstanceKind kind, Index n, std::uint64_t seed)
    : kind_(kind), n_(n), rng_(make_stream(seed, 0)) {
  require(n >= 1, ErrorCode::argument, "random matrices need n ≥ 1");
}

Mat RandomMatrixStream::next() {
  switch (kind_) {
    case InstanceKind::sym: return random_sym(n_, rng_);
    case InstanceKind::psd: return random_psd(n_, rng_);
    case InstanceKind::projector: return random_projector(n_, rng_);
  }
  return {};
}

std::vector<Mat> random_instances(InstanceKind kind, Index n, int count, std::uint64_t seed) {
  RandomMatrixStream stream(kind, n, seed);
  std::vector<Mat> out;
  for (int i = 0; i < count; ++i) out.push_back(stream.next());
  return out;
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json j{{"inequality", inequality},
                   {"trials", trials},
                   {"max_violation", max_violation},
                   {"worst_instance_seed", worst_instance_seed},
                   {"failures", failures},
                   {"tolerance", tolerance}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

std::uint64_t instance_seed(std::uint64_t seed, int trial) {
  return splitmix(seed ^ splitmix(static_cast<std::uint64_t>(trial) + 1));
}

SuiteReport run_inequality_suite(const std::string& which, int trials, std::uint64_t seed, int max_n) {
  require(which == "trace_holder" || which == "lieb_thirring" || which == "eldan_lieb", ErrorCode::argument,
          "unknown inequality '" + which + "'");
  require(trials >= 1 && max_n >= 1, ErrorCode::argument, "suite needs trials ≥ 1 and max_n ≥ 1");
  SuiteReport rep;
  rep.inequality = which;
  rep.trials = trials;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t iseed = instance_seed(seed, trial);
    Rng rng = make_stream(iseed, 0);
    const Index n = std::uniform_int_distribution<Index>(1, max_n)(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Sides sides;
    if (which == "trace_holder") {
      const double s = 1.0 + 1e-3 + 4.0 * unit(rng);
      const double t = s / (s - 1.0);
      sides = trace_holder(SymMatrix(random_sym(n, rng)), SymMatrix(random_sym(n, rng)), s, t);
    } else if (which == "lieb_thirring") {
      const double r = 1.0 + 3.0 * unit(rng);
      const Mat a = random_psd(n, rng);
      const Mat b = random_psd(n, rng);
      sides = lieb_thirring(a, b, r);
    } else {
      const double alpha = unit(rng);
      const Mat a = random_psd(n, rng);
      sides = eldan_lieb(a, SymMatrix(random_sym(n, rng)), alpha);
    }
    const double v = sides.relative_violation();
    if (v > rep.max_violation || trial == 0) {
      rep.max_violation = std::max(rep.max_violation, v);
      rep.worst_instance_seed = iseed;
    }
    if (v > rep.tolerance) ++rep.failures;
  }
  return rep;
}

SuiteReport run_projected_inverse_suite(int trials, std::uint64_t seed, int max_n) {
  require(trials >= 1 && max_n >= 1, ErrorCode::argument, "suite needs trials ≥ 1 and max_n ≥ 1");
  SuiteReport rep;
  rep.inequality = "projected_inverse_limit";
  rep.trials = trials;
  rep.tolerance = 1.0;
  double worst_scaled = 0.0;
  int failures_scaled = 0;
  int nullspace_failures = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t iseed = instance_seed(seed, trial);
    Rng rng = make_stream(iseed, 0);
    const Index n = std::uniform_int_distribution<Index>(1, max_n)(rng);
    const Mat a = random_psd(n, rng);
    const Mat p = random_projector(n, rng);
    const ProjectedInverse pi = projected_inverse_limit(a, p);
    const double v = std::max(pi.finite_s_error / pi.finite_s_tolerance, pi.nullspace_residual / 1e-9);
    if (v > rep.max_violation || trial == 0) {
      rep.max_violation = std::max(rep.max_violation, v);
      rep.worst_instance_seed = iseed;
    }
    if (!(pi.nullspace_ok && pi.finite_s_ok)) ++rep.failures;
    worst_scaled = std::max(worst_scaled, pi.finite_s_error / pi.finite_s_tolerance_scaled);
    if (!(pi.nullspace_ok && pi.finite_s_ok_scaled)) ++failures_scaled;
    if (!pi.nullspace_ok) ++nullspace_failures;
  }
  rep.extra = {{"max_violation_scaled", worst_scaled},
               {"failures_scaled", failures_scaled},
               {"nullspace_failures", nullspace_failures}};
  return rep;
}

}  // namespace sloc
