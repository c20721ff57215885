#include "sloc/tensor.hpp"

#include "sloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sloc {

namespace {

using RowMap = Eigen::Map<const RowMat>;
using MutRowMap = Eigen::Map<RowMat>;

// Σ_a w_a x_a⊗x_a⊗x_a over rows [begin, end), unnormalized.
Moment3 weighted_cube_sum(const RowMat& x, const Vec& w, Index begin, Index end) {
  const Index n = x.cols();
  Moment3 m{n, std::vector<double>(static_cast<std::size_t>(n * n * n), 0.0)};
  const auto block = x.middleRows(begin, end - begin);
  const auto wb = w.segment(begin, end - begin);
  Vec y(end - begin);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      y = wb.cwiseProduct(block.col(i)).cwiseProduct(block.col(j));
      const Vec col = block.transpose() * y;
      for (Index k = 0; k < n; ++k) {
        m.data[(i * n + j) * n + k] = col(k);
        m.data[(j * n + i) * n + k] = col(k);
      }
    }
  }
  return m;
}

Moment3 scaled(const Moment3& m, double s) {
  Moment3 out = m;
  for (double& v : out.data) v *= s;
  return out;
}

Moment3 leave_out(const Moment3& total, const Moment3& part, double weight) {
  Moment3 out = total;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = (total.data[i] - part.data[i]) / weight;
  return out;
}

double jackknife_se(const std::vector<double>& loo) {
  const double g = static_cast<double>(loo.size());
  if (g < 2) return 0.0;
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / g;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt((g - 1.0) / g * ss);
}

void require_square(const Mat& m, Index n, const char* what) {
  require(m.rows() == n && m.cols() == n, ErrorCode::argument, std::string(what) + " has the wrong shape");
}

void require_psd(const Mat& m, const char* what) {
  const double floor = -1e-10 * std::max(1.0, sym_op_norm(m));
  if (min_eigenvalue(m) < floor) fail(ErrorCode::not_psd, std::string(what) + " is not positive semidefinite");
}

Mat identity(Index n) { return Mat::Identity(n, n); }

}  // namespace

Moment3 third_moments(const Ensemble& e) {
  return weighted_cube_sum(e.points(), e.weights(), 0, e.size());
}

Moment3 central_third_moments(const Ensemble& e, const Vec& mean) {
  RowMat centered = e.points().rowwise() - mean.transpose();
  return weighted_cube_sum(centered, e.weights(), 0, e.size());
}

double moment_contraction(const Moment3& m, const Mat& C) {
  const Index n = m.n;
  RowMap slab(m.data.data(), n * n, n);
  return (slab * C).cwiseProduct(slab).sum();
}

double contract(const Moment3& x, const Mat& A, const Mat& B, const Mat& C, const Moment3& y) {
  const Index n = x.n;
  RowMap ymat(y.data.data(), n, n * n);
  RowMat z1 = A * ymat;  // (i, l·n + n')
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    MutRowMap slice(z1.data() + i * n * n, n, n);
    RowMat z3 = B * slice * C.transpose();  // (k, m)
    RowMap xs(x.data.data() + i * n * n, n, n);
    total += xs.cwiseProduct(z3).sum();
  }
  return total;
}

// ---------------------------------------------------------------------------

TensorEstimator::TensorEstimator(const Ensemble& e) : n_(e.dim()) {
  require(n_ <= 64, ErrorCode::cost_guard, "tensor estimates need n ≤ 64 (n³ memory)");
  const Index half = e.size() / 2;
  require(half >= 100, ErrorCode::insufficient_sample,
          "tensor estimate needs at least 100 points per half, got " + std::to_string(half));
  const RowMat& x = e.points();
  const Vec& w = e.weights();
  const Index y_begin = half;
  const Index y_size = e.size() - half;
  pairs_ = half * y_size;

  auto build = [&](Index begin, Index size, Moment3& full, std::vector<Moment3>& loo) {
    std::vector<Moment3> parts;
    std::vector<double> part_w;
    Moment3 total{n_, std::vector<double>(static_cast<std::size_t>(n_ * n_ * n_), 0.0)};
    double total_w = 0.0;
    for (int g = 0; g < kGroups; ++g) {
      const Index b = begin + size * g / kGroups;
      const Index f = begin + size * (g + 1) / kGroups;
      parts.push_back(weighted_cube_sum(x, w, b, f));
      part_w.push_back(w.segment(b, f - b).sum());
      for (std::size_t i = 0; i < total.data.size(); ++i) total.data[i] += parts.back().data[i];
      total_w += part_w.back();
    }
    require(total_w > 0.0, ErrorCode::degenerate_ensemble, "a half of the cloud carries no weight");
    full = scaled(total, 1.0 / total_w);
    loo.clear();
    for (int g = 0; g < kGroups; ++g) {
      const double rest = total_w - part_w[g];
      require(rest > 0.0, ErrorCode::degenerate_ensemble, "all weight of a half sits in one jackknife group");
      loo.push_back(leave_out(total, parts[g], rest));
    }
  };
  build(0, half, full_x_, loo_x_);
  build(y_begin, y_size, full_y_, loo_y_);
}

std::vector<double> TensorEstimator::replicates(const Mat& A, const Mat& B, const Mat& C) const {
  require_square(A, n_, "A");
  require_square(B, n_, "B");
  require_square(C, n_, "C");
  std::vector<double> out;
  out.reserve(kGroups + 1);
  out.push_back(contract(full_x_, A, B, C, full_y_));
  for (int g = 0; g < kGroups; ++g) out.push_back(contract(loo_x_[g], A, B, C, loo_y_[g]));
  return out;
}

TensorEstimate TensorEstimator::summarize(const std::vector<double>& reps) const {
  std::vector<double> loo(reps.begin() + 1, reps.end());
  return {reps.front(), jackknife_se(loo), pairs_};
}

TensorEstimate TensorEstimator::estimate(const Mat& A, const Mat& B, const Mat& C) const {
  return summarize(replicates(A, B, C));
}

TensorEstimate TensorEstimator::combination(const std::vector<Term>& terms) const {
  std::vector<double> total(kGroups + 1, 0.0);
  for (const Term& term : terms) {
    auto reps = replicates(term.A, term.B, term.C);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += term.coef * reps[i];
  }
  return summarize(total);
}

std::vector<double> TensorEstimator::replicate_values(const Mat& A, const Mat& B, const Mat& C) const {
  return replicates(A, B, C);
}

double TensorEstimator::jackknife(const std::vector<double>& reps) {
  return jackknife_se(std::vector<double>(reps.begin() + 1, reps.end()));
}

TensorEstimate tensor_T(const Ensemble& e, const Mat& A, const Mat& B, const Mat& C) {
  return TensorEstimator(e).estimate(A, B, C);
}

// ---------------------------------------------------------------------------

std::vector<Mat> delta_slices(const Ensemble& e, const Mat& directions) {
  const Index n = e.dim();
  require(directions.rows() == n, ErrorCode::argument, "directions have the wrong dimension");
  const RowMat& x = e.points();
  const Vec& w = e.weights();
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(directions.cols()));
  for (Index i = 0; i < directions.cols(); ++i) {
    const Vec proj = x * directions.col(i);
    const Vec coef = w.cwiseProduct(proj);
    RowMat scaled_rows = x.array().colwise() * coef.array();
    out.push_back(symmetrize(x.transpose() * scaled_rows));
  }
  return out;
}

std::vector<Mat> delta_slices(const Ensemble& e) { return delta_slices(e, identity(e.dim())); }

double TequResult::max_rel_gap() const {
  const double scale = std::max({std::abs(lhs), std::abs(rhs1), std::abs(rhs2), 1e-300});
  return std::max({std::abs(lhs - rhs1), std::abs(lhs - rhs2), std::abs(rhs1 - rhs2)}) / scale;
}

TequResult tequ_check(const Ensemble& e, const Mat& A, const Mat& B) {
  const Index n = e.dim();
  require_square(A, n, "A");
  require_square(B, n, "B");
  const RowMat& x = e.points();
  const Vec& w = e.weights();
  TequResult out;
  if (e.size() <= 4000) {
    const RowMat xa = x * A;
    const RowMat xb = x * B;
    for (Index a = 0; a < e.size(); ++a) {
      const Vec u = x * xa.row(a).transpose();
      const Vec v = x * xb.row(a).transpose();
      const Vec s = x * x.row(a).transpose();
      out.lhs += w(a) * w.dot(u.cwiseProduct(v).cwiseProduct(s));
    }
  } else {
    const Moment3 m = third_moments(e);
    out.lhs = contract(m, A, B, identity(n), m);
  }
  const auto delta = delta_slices(e);
  for (Index i = 0; i < n; ++i) out.rhs1 += (A * delta[i] * B * delta[i]).trace();
  for (Index i = 0; i < n; ++i) {
    const Mat left = delta[i] * B;
    for (Index j = 0; j < n; ++j) {
      if (A(i, j) != 0.0) out.rhs2 += A(i, j) * (left * delta[j]).trace();
    }
  }
  return out;
}

std::vector<CheckResult> trabs_check(const Ensemble& e, const std::vector<MatrixTriple>& psd_triples,
                                     const std::vector<MatrixTriple>& sym_triples) {
  TensorEstimator est(e);
  std::vector<CheckResult> out;
  for (std::size_t i = 0; i < psd_triples.size(); ++i) {
    const auto& tr = psd_triples[i];
    require_psd(tr.first, "A1");
    require_psd(tr.second, "A2");
    require_psd(tr.third, "A3");
    const TensorEstimate t = est.estimate(tr.first, tr.second, tr.third);
    // T ≥ −3SE written as 0 ≤ T + 3SE.
    CheckResult r = asserted_le("trabs_psd_" + std::to_string(i), 0.0, t.value, t.std_error, 3.0 * t.std_error);
    r.lhs = t.value;
    r.rhs = 0.0;
    r.ratio = 0.0;
    out.push_back(r);
  }
  for (std::size_t i = 0; i < sym_triples.size(); ++i) {
    const auto& tr = sym_triples[i];
    const Mat a1 = sym_abs(tr.first), a2 = sym_abs(tr.second), a3 = sym_abs(tr.third);
    const TensorEstimate lhs = est.estimate(tr.first, tr.second, tr.third);
    const TensorEstimate rhs = est.estimate(a1, a2, a3);
    const TensorEstimate diff = est.combination({{1.0, tr.first, tr.second, tr.third}, {-1.0, a1, a2, a3}});
    const double slack = 3.0 * diff.std_error + 1e-10 * (std::abs(lhs.value) + std::abs(rhs.value));
    out.push_back(asserted_le("trabs_abs_" + std::to_string(i), lhs.value, rhs.value, diff.std_error, slack));
  }
  return out;
}

ThirdMomentCube third_moment_cube(const Ensemble& e) {
  const Index n = e.dim();
  require(n <= 64, ErrorCode::cost_guard, "third_moment_cube needs n ≤ 64 (n³ memory)");
  const Moment3 m = third_moments(e);
  double total = 0.0;
  for (double v : m.data) total += v * v;
  return {total, total / static_cast<double>(n)};
}

NormRatio tensor_norm_ratio(const Ensemble& e, Index max_pairs) {
  require(max_pairs >= 1, ErrorCode::argument, "max_pairs must be positive");
  const Moments mom = weighted_mean_cov(e);
  const Index half = e.size() / 2;
  require(half >= 1, ErrorCode::insufficient_sample, "tensor_norm_ratio needs at least two points");
  const RowMat centered = e.points().rowwise() - mom.mean.transpose();
  const Vec& w = e.weights();
  const Index m1 = half;
  const Index m2 = e.size() - half;
  const Index shifts = std::clamp<Index>((max_pairs + m1 - 1) / m1, 1, m2);
  constexpr int groups = TensorEstimator::kGroups;

  std::vector<double> num(groups, 0.0), den(groups, 0.0);
  for (Index a = 0; a < m1; ++a) {
    const int g = static_cast<int>(a * groups / m1);
    const auto xa = centered.row(a);
    for (Index s = 0; s < shifts; ++s) {
      const Index b = half + (a + s) % m2;
      const double pw = w(a) * w(b);
      const double ip = xa.dot(centered.row(b));
      num[g] += pw * std::abs(ip) * ip * ip;
      den[g] += pw;
    }
  }
  const double num_total = std::accumulate(num.begin(), num.end(), 0.0);
  const double den_total = std::accumulate(den.begin(), den.end(), 0.0);
  require(den_total > 0.0, ErrorCode::degenerate_ensemble, "pair weights vanish");
  NormRatio out;
  out.numerator = num_total / den_total;
  out.pairs_used = m1 * shifts;
  std::vector<double> loo;
  for (int g = 0; g < groups; ++g) {
    if (den_total - den[g] > 0.0) loo.push_back((num_total - num[g]) / (den_total - den[g]));
  }
  out.std_error = jackknife_se(loo);
  const double phi2 = (mom.cov * mom.cov).trace();
  out.ratio = safe_ratio(out.numerator, std::pow(phi2, 1.5));
  return out;
}

CheckResult tensorestimate_ratio(const Ensemble& e, const Mat& B, const Mat& C) {
  const Index n = e.dim();
  require_square(B, n, "B");
  require_square(C, n, "C");
  require_psd(B, "B");
  const Moments mom = weighted_mean_cov(e);
  const RowMat centered = e.points().rowwise() - mom.mean.transpose();
  const Vec quad = (centered * C).cwiseProduct(centered).rowwise().sum();
  const Vec coef = e.weights().cwiseProduct(quad);
  const Vec v = psd_sqrt(B) * (centered.transpose() * coef);
  const double lhs = v.norm();
  const Mat a_half = psd_sqrt(mom.cov);
  const double rhs = std::sqrt(sym_op_norm(a_half * B * a_half)) * sym_abs(a_half * C * a_half).trace();
  if (rhs == 0.0 && lhs > 1e-12) {
    fail(ErrorCode::inconsistency, "tensorestimate: right side vanishes while the left side is " + std::to_string(lhs));
  }
  return reported("tensorestimate", lhs, rhs);
}

std::vector<CheckResult> tinq_report(const Ensemble& e, const Mat& A, const Mat& B, const PsiCurve& psi,
                                     double s) {
  const Index n = e.dim();
  require_square(A, n, "A");
  require_square(B, n, "B");
  require(s >= 1.0, ErrorCode::argument, "tinq: exponent s must be at least 1");
  const double t = s > 1.0 ? s / (s - 1.0) : std::numeric_limits<double>::infinity();
  TensorEstimator est(e);
  const Mat I = identity(n);
  const double psi_n = psi(static_cast<double>(n));
  const double tr_abs_a = sym_abs(A).trace();
  std::vector<CheckResult> out;

  // Items 1 and 2 involve a single x.
  const RowMat& x = e.points();
  const Vec& w = e.weights();
  const Vec q = (x * A).cwiseProduct(x).rowwise().sum();
  const double ess = e.ess();
  auto weighted_mean_se = [&](const Vec& values) {
    const double mean = w.dot(values);
    const double var = w.dot((values.array() - mean).square().matrix());
    return std::pair{mean, std::sqrt(var / ess)};
  };
  {
    auto [m1, se1] = weighted_mean_se(q.array().square().matrix());
    out.push_back(reported("tinq_1", m1, tr_abs_a * tr_abs_a, se1));
    auto [m2, se2] = weighted_mean_se((q.array() - A.trace()).square().matrix());
    out.push_back(reported("tinq_2", m2, psi_n * psi_n * (A * A).trace(), se2));
  }
  const TensorEstimate taii = est.estimate(A, I, I);
  out.push_back(reported("tinq_3", taii.value, psi_n * sym_op_norm(A) * static_cast<double>(n), taii.std_error));
  out.push_back(reported("tinq_4", taii.value, psi_n * psi_n * tr_abs_a, taii.std_error));

  const TensorEstimate tabi = est.estimate(A, B, I);
  const int rank_b = numerical_rank(B);
  const double psi_r = psi(static_cast<double>(std::min<Index>(2 * rank_b, n)));
  out.push_back(reported("tinq_5", tabi.value, psi_r * psi_r * sym_op_norm(B) * tr_abs_a, tabi.std_error));

  const double alpha = std::max(1.0, psi.kappa);
  const double beta = psi.exponent;
  double b_norm = 0.0;
  if (beta > 0.0) {
    b_norm = std::pow(sym_abs_pow(B, 1.0 / (2.0 * beta)).trace(), 2.0 * beta);
  } else {
    b_norm = sym_op_norm(B);
  }
  out.push_back(reported("tinq_6", tabi.value, alpha * alpha * std::log(static_cast<double>(n)) * b_norm * tr_abs_a,
                         tabi.std_error));

  // Item 7 is constant free and asserted.
  const Mat as = sym_abs_pow(A, s);
  const Mat bt = std::isinf(t) ? Mat(I * sym_op_norm(B)) : sym_abs_pow(B, t);
  const auto r_lhs = est.replicate_values(A, B, I);
  const auto r_a = est.replicate_values(as, I, I);
  const auto r_b = est.replicate_values(bt, I, I);
  auto rhs_of = [&](std::size_t i) {
    const double fa = std::pow(std::max(0.0, r_a[i]), 1.0 / s);
    const double fb = std::isinf(t) ? std::max(0.0, r_b[i]) : std::pow(std::max(0.0, r_b[i]), 1.0 / t);
    return fa * fb;
  };
  std::vector<double> diff;
  for (std::size_t i = 0; i < r_lhs.size(); ++i) diff.push_back(r_lhs[i] - rhs_of(i));
  const double se = TensorEstimator::jackknife(diff);
  const double rhs7 = rhs_of(0);
  const double slack = 3.0 * se + 1e-10 * (std::abs(rhs7) + std::abs(r_lhs[0]));
  out.push_back(asserted_le("tinq_7", r_lhs[0], rhs7, se, slack));
  return out;
}

CheckResult liebtr_check(const Ensemble& e, const Mat& A, const Mat& B, const Mat& C, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::argument, "liebtr: alpha must lie in [0, 1]");
  const Index n = e.dim();
  require_square(A, n, "A");
  require_square(B, n, "B");
  require_square(C, n, "C");
  require_psd(A, "A");
  require_psd(B, "B");
  require_psd(C, "C");
  const Mat bh = psd_sqrt(B);
  const Mat l1 = symmetrize(bh * psd_pow(A, alpha) * bh);
  const Mat l2 = symmetrize(bh * psd_pow(A, 1.0 - alpha) * bh);
  const Mat r1 = symmetrize(bh * A * bh);
  TensorEstimator est(e);
  const TensorEstimate lhs = est.estimate(l1, l2, C);
  const TensorEstimate rhs = est.estimate(r1, B, C);
  const TensorEstimate diff = est.combination({{1.0, l1, l2, C}, {-1.0, r1, B, C}});
  const double slack = 3.0 * diff.std_error + 1e-10 * (std::abs(lhs.value) + std::abs(rhs.value));
  return asserted_le("liebtr", lhs.value, rhs.value, diff.std_error, slack);
}

HalfspaceProfile halfspace_profile_V(const Ensemble& e, const Vec& y, const std::vector<double>& t_grid) {
  require(y.size() == e.dim(), ErrorCode::argument, "y has the wrong dimension");
  const double norm = y.norm();
  require(norm > 0.0, ErrorCode::argument, "halfspace_profile_V: y must be nonzero");
  const Vec proj = e.points() * y;
  const Vec& w = e.weights();
  HalfspaceProfile out;
  for (double t : t_grid) {
    double v = 0.0;
    for (Index i = 0; i < proj.size(); ++i) {
      if (proj(i) >= t) v += w(i);
    }
    const double bound = std::exp(1.0 - std::abs(t) / norm);
    out.v.push_back(v);
    out.bound.push_back(bound);
    if (t >= 0.0 && v > bound) out.within_bound = false;
  }
  return out;
}

CheckResult trDAD_projection_check(const Ensemble& e, const Vec& v, const Mat& P, const PsiCurve& psi) {
  const Index n = e.dim();
  require(v.size() == n, ErrorCode::argument, "v has the wrong dimension");
  require_square(P, n, "P");
  require((P * P - P).norm() <= 1e-10 * std::max(1.0, P.norm()), ErrorCode::argument, "P must be a projector");
  const Mat delta = delta_slices(e, v).front();
  const int r = numerical_rank(P);
  const double p = psi(static_cast<double>(std::min<Index>(2 * r, n)));
  return reported("trDAD_projection", (delta * P * delta).trace(), p * p);
}

}  // namespace sloc
