#pragma once

#include <Eigen/Dense>

#include <functional>

namespace sloc {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SymEig {
  Vec values;   // ascending
  Mat vectors;  // columns are eigenvectors
};

Mat symmetrize(const Mat& m);

/// Eigendecomposition of the symmetric part of `m`. Throws linear_algebra on failure.
SymEig sym_eig(const Mat& m);

/// V f(Λ) Vᵀ for the symmetric part of `m`.
Mat spectral_apply(const Mat& m, const std::function<double(double)>& f);
Mat spectral_apply(const SymEig& eig, const std::function<double(double)>& f);

/// Negative eigenvalues clamped to zero.
Mat psd_floor(const Mat& m);

/// Fractional power of a PSD matrix. Eigenvalues are clamped at 0 first and
/// 0^0 is taken as 1, so psd_pow(A, 0) = I.
Mat psd_pow(const Mat& m, double p);
Mat psd_sqrt(const Mat& m);

/// |M| = sqrt(M²), i.e. absolute values of the eigenvalues.
Mat sym_abs(const Mat& m);
/// |M|^p.
Mat sym_abs_pow(const Mat& m, double p);

/// Moore-Penrose pseudoinverse of a symmetric matrix. Eigenvalues with
/// |λ| ≤ rel_cutoff·max|λ| are treated as zero.
Mat sym_pinv(const Mat& m, double rel_cutoff = 1e-10);

/// Spectral norm of a symmetric matrix (max |λ|).
double sym_op_norm(const Mat& m);
/// Spectral norm of a general matrix.
double op_norm(const Mat& m);

double min_eigenvalue(const Mat& m);
double max_eigenvalue(const Mat& m);

/// Number of eigenvalues above rel_cutoff·max|λ|.
int numerical_rank(const Mat& m, double rel_cutoff = 1e-10);

bool is_symmetric(const Mat& m, double rel_tol = 1e-12);

/// tr(M^q) for symmetric M and integer q ≥ 1 via eigenvalues.
double trace_power(const Mat& m, int q);

}  // namespace sloc
