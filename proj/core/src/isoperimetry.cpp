#include "sloc/isoperimetry.hpp"

#include "sloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace sloc {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

Vec unit_or_throw(const Vec& d, Index n) {
  require(d.size() == n, ErrorCode::argument, "direction has the wrong dimension");
  const double norm = d.norm();
  require(std::abs(norm - 1.0) < 1e-8, ErrorCode::argument, "direction must be a unit vector");
  return d;
}

}  // namespace

double weighted_median(const Ensemble& e, const Vec& direction) {
  const Vec p = e.points() * direction;
  const Vec& w = e.weights();
  std::vector<Index> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return p(a) < p(b); });
  double acc = 0.0;
  for (Index i : order) {
    acc += w(i);
    if (acc >= 0.5) return p(i);
  }
  return p(order.back());
}

CutReport halfspace_cut(const Ensemble& e, const Vec& direction, double offset) {
  const Vec d = unit_or_throw(direction, e.dim());
  const Vec p = e.points() * d;
  const Vec& w = e.weights();
  const double lo = p.minCoeff(), hi = p.maxCoeff();
  if (!(offset >= lo && offset <= hi)) {
    fail(ErrorCode::extrapolation, "offset " + std::to_string(offset) + " lies outside the projected range [" +
                                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  double upper = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) >= offset) upper += w(i);
  }
  CutReport out;
  out.direction = d;
  out.offset = offset;
  out.min_side_measure = std::min(upper, 1.0 - upper);
  require(out.min_side_measure > 0.0, ErrorCode::extrapolation, "one side of the cut carries no weight");

  const double mean = w.dot(p);
  const double sd = std::sqrt(std::max(w.dot((p.array() - mean).square().matrix()), 0.0));
  require(sd > 0.0, ErrorCode::degenerate_ensemble, "projection has zero spread");
  const double ess = e.ess();
  out.bandwidth = 1.06 * sd * std::pow(ess, -0.2);
  const double h = out.bandwidth;
  double f = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double z = (offset - p(i)) / h;
    f += w(i) * std::exp(-0.5 * z * z);
  }
  f *= kInvSqrt2Pi / h;
  out.boundary_density = f;
  out.expansion = f / out.min_side_measure;
  // Var f̂ ≈ f·∫K²/(ESS·h) with ∫K² = 1/(2√π) for the Gaussian kernel.
  const double var_f = f / (2.0 * std::sqrt(M_PI) * ess * h);
  out.expansion_se = std::sqrt(var_f) / out.min_side_measure;
  return out;
}

BestCut best_halfspace_expansion(const Ensemble& e, int n_directions, std::uint64_t seed) {
  require(n_directions >= 1, ErrorCode::argument, "n_directions must be at least 1");
  const Index n = e.dim();
  std::vector<Vec> dirs;
  for (Index i = 0; i < n; ++i) {
    dirs.push_back(Vec::Unit(n, i));
    dirs.push_back(-Vec::Unit(n, i));
  }
  Rng rng = make_stream(seed, streams::directions);
  std::normal_distribution<double> normal;
  for (int k = 0; k < n_directions; ++k) {
    Vec v(n);
    do {
      for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    } while (v.norm() == 0.0);
    dirs.push_back(v.normalized());
  }
  BestCut out;
  for (const Vec& d : dirs) {
    out.cuts.push_back(halfspace_cut(e, d, weighted_median(e, d)));
  }
  out.worst = *std::min_element(out.cuts.begin(), out.cuts.end(),
                                [](const CutReport& a, const CutReport& b) { return a.expansion < b.expansion; });
  out.psi_estimate = 1.0 / out.worst.expansion;
  return out;
}

GaussianFactor gaussian_factor_expansion(const BaseDensity& base, const Mat& B, const Ensemble& e_tilted,
                                         int n_directions, std::uint64_t seed, double floor) {
  require(B.rows() == base.dim() && B.cols() == base.dim() && e_tilted.dim() == base.dim(), ErrorCode::argument,
          "gaussian_factor_expansion: dimension mismatch");
  const double low = min_eigenvalue(B);
  require(low > 1e-12 * std::max(1.0, sym_op_norm(B)), ErrorCode::argument, "B must be positive definite");
  GaussianFactor out;
  out.measured_expansion = best_halfspace_expansion(e_tilted, n_directions, seed).worst.expansion;
  out.bound = std::sqrt(low);  // ‖B⁻¹‖^{−1/2}
  out.ratio = out.measured_expansion / out.bound;
  out.floor = floor;
  out.passes = out.ratio >= floor;
  return out;
}

PoincareRatio poincare_ratio(const Ensemble& e, const Mat& A, const PsiCurve& psi) {
  const Index n = e.dim();
  require(A.rows() == n && A.cols() == n, ErrorCode::argument, "A has the wrong shape");
  const RowMat& x = e.points();
  const Vec& w = e.weights();
  const RowMat ax = x * A.transpose();  // rows are (A x)ᵀ
  const Vec q = ax.cwiseProduct(x).rowwise().sum();
  const double denom = w.dot(ax.rowwise().squaredNorm());
  if (!(denom > 0.0)) fail(ErrorCode::trivial_form, "E‖Ax‖² vanishes on this ensemble");
  const double mean = w.dot(q);
  const double var = w.dot((q.array() - mean).square().matrix());
  PoincareRatio out;
  out.ratio = var / denom;
  out.rank = numerical_rank(A + A.transpose());
  const double p = psi(static_cast<double>(out.rank));
  out.psi_sq = p * p;
  return out;
}

bool is_unimodal(const std::vector<double>& values) {
  std::size_t i = 1;
  while (i < values.size() && values[i] <= values[i - 1]) ++i;
  while (i < values.size() && values[i] >= values[i - 1]) ++i;
  return i >= values.size();
}

KlsTable kls_recursion(double alpha1, double beta1, double n, int iterations, double C) {
  require(beta1 > 0.0 && beta1 <= 0.5, ErrorCode::argument, "beta1 must lie in (0, 1/2]");
  require(alpha1 >= 1.0, ErrorCode::argument, "alpha1 must be at least 1");
  require(n >= 3.0, ErrorCode::argument, "n must be at least 3");
  require(iterations >= 0, ErrorCode::argument, "iterations must be non-negative");
  require(C > 0.0, ErrorCode::argument, "C must be positive");
  const double log_n = std::log(n);
  const double step = std::log(4.0 * C) + 0.5 * std::log(log_n);
  KlsTable out;
  KlsRow row{1, std::log(alpha1), beta1, std::log(alpha1) + beta1 * log_n};
  out.rows.push_back(row);
  for (int it = 0; it < iterations; ++it) {
    KlsRow next;
    next.ell = row.ell + 1;
    next.log_alpha = row.log_alpha + step - 0.5 * std::log(row.beta);
    next.beta = row.beta - row.beta * row.beta / 16.0;
    next.log_bound = next.log_alpha + next.beta * log_n;
    out.rows.push_back(next);
    row = next;
  }
  std::vector<double> bounds;
  out.best_log_bound = out.rows.front().log_bound;
  out.best_ell = 1;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const auto& r = out.rows[i];
    bounds.push_back(r.log_bound);
    if (r.log_bound < out.best_log_bound) {
      out.best_log_bound = r.log_bound;
      out.best_ell = r.ell;
    }
    if (!(r.beta > 0.0)) out.beta_decreasing = false;
    if (i > 0 && !(r.beta < out.rows[i - 1].beta)) out.beta_decreasing = false;
    if (r.beta > 16.0 / r.ell) out.beta_within_16_over_ell = false;
  }
  out.unimodal = is_unimodal(bounds);
  return out;
}

void write_cuts_csv(std::ostream& out, const BestCut& best) {
  out << "direction_id,offset,boundary_density,min_side,expansion\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < best.cuts.size(); ++i) {
    const auto& c = best.cuts[i];
    out << i << ',' << c.offset << ',' << c.boundary_density << ',' << c.min_side_measure << ',' << c.expansion
        << '\n';
  }
  out.precision(old);
}

nlohmann::json to_json(const BestCut& best) {
  return {{"psi_estimate", best.psi_estimate},
          {"min_expansion", best.worst.expansion},
          {"min_expansion_se", best.worst.expansion_se},
          {"directions", best.cuts.size()},
          {"worst_direction", std::vector<double>(best.worst.direction.data(),
                                                  best.worst.direction.data() + best.worst.direction.size())}};
}

}  // namespace sloc
