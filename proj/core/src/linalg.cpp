#include "sloc/linalg.hpp"

#include "sloc/error.hpp"

#include <algorithm>
#include <cmath>

namespace sloc {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

SymEig sym_eig(const Mat& m) {
  require(m.rows() == m.cols(), ErrorCode::argument, "sym_eig needs a square matrix");
  if (m.rows() == 0) return {Vec(0), Mat(0, 0)};
  Eigen::SelfAdjointEigenSolver<Mat> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) fail(ErrorCode::linear_algebra, "eigendecomposition did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Mat spectral_apply(const SymEig& eig, const std::function<double(double)>& f) {
  Vec mapped = eig.values.unaryExpr(f);
  return eig.vectors * mapped.asDiagonal() * eig.vectors.transpose();
}

Mat spectral_apply(const Mat& m, const std::function<double(double)>& f) {
  return spectral_apply(sym_eig(m), f);
}

Mat psd_floor(const Mat& m) {
  return spectral_apply(m, [](double x) { return std::max(x, 0.0); });
}

Mat psd_pow(const Mat& m, double p) {
  return spectral_apply(m, [p](double x) { return std::pow(std::max(x, 0.0), p); });
}

Mat psd_sqrt(const Mat& m) {
  return spectral_apply(m, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

Mat sym_abs(const Mat& m) {
  return spectral_apply(m, [](double x) { return std::abs(x); });
}

Mat sym_abs_pow(const Mat& m, double p) {
  return spectral_apply(m, [p](double x) { return std::pow(std::abs(x), p); });
}

Mat sym_pinv(const Mat& m, double rel_cutoff) {
  SymEig eig = sym_eig(m);
  if (eig.values.size() == 0) return Mat(0, 0);
  const double cutoff = rel_cutoff * eig.values.cwiseAbs().maxCoeff();
  return spectral_apply(eig, [cutoff](double x) { return std::abs(x) > cutoff ? 1.0 / x : 0.0; });
}

double sym_op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> solver(symmetrize(m), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) fail(ErrorCode::linear_algebra, "eigenvalues did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

namespace {
Vec eigenvalues_only(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(symmetrize(m), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) fail(ErrorCode::linear_algebra, "eigenvalues did not converge");
  return solver.eigenvalues();
}
}  // namespace

double min_eigenvalue(const Mat& m) { return eigenvalues_only(m).minCoeff(); }
double max_eigenvalue(const Mat& m) { return eigenvalues_only(m).maxCoeff(); }

int numerical_rank(const Mat& m, double rel_cutoff) {
  if (m.size() == 0) return 0;
  Vec values = eigenvalues_only(m).cwiseAbs();
  const double top = values.maxCoeff();
  if (top == 0.0) return 0;
  return static_cast<int>((values.array() > rel_cutoff * top).count());
}

bool is_symmetric(const Mat& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.norm());
  return (m - m.transpose()).norm() <= rel_tol * scale;
}

double trace_power(const Mat& m, int q) {
  Vec values = eigenvalues_only(m);
  double total = 0.0;
  for (Index i = 0; i < values.size(); ++i) total += std::pow(values(i), q);
  return total;
}

}  // namespace sloc
