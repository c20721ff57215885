#include "sloc/localization.hpp"

#include "sloc/error.hpp"
#include "sloc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sloc {

double PsiCurve::operator()(double r) const { return std::max(1.0, kappa * std::pow(r, exponent)); }

nlohmann::json PsiCurve::to_json() const { return {{"kappa", kappa}, {"exponent", exponent}}; }

PsiCurve PsiCurve::from_json(const nlohmann::json& j) {
  PsiCurve p;
  p.kappa = j.value("kappa", p.kappa);
  p.exponent = j.value("exponent", p.exponent);
  return p;
}

ControlPolicy ControlPolicy::identity(int q) {
  ControlPolicy p;
  p.q = q;
  return p;
}

ControlPolicy ControlPolicy::adaptive(double u, int q, PsiCurve psi) {
  ControlPolicy p;
  p.mode = ControlMode::adaptive;
  p.u = u;
  p.q = q;
  p.psi = psi;
  return p;
}

double ControlPolicy::default_u(int n, int q) { return 0.25 * std::pow(static_cast<double>(n), -1.0 / q); }

void ControlPolicy::validate() const {
  require(q >= 1, ErrorCode::config, "policy.q must be at least 1");
  require(psi.kappa > 0.0 && std::isfinite(psi.kappa), ErrorCode::config, "policy.psi.kappa must be positive");
  require(psi.exponent >= 0.0 && psi.exponent <= 0.5, ErrorCode::config, "policy.psi.exponent must lie in [0, 1/2]");
  if (mode == ControlMode::adaptive) {
    require(u > 0.0 && std::isfinite(u), ErrorCode::config, "policy.u must be positive for adaptive control");
  }
}

nlohmann::json ControlPolicy::to_json() const {
  nlohmann::json j{{"mode", mode == ControlMode::identity ? "identity" : "adaptive"}, {"q", q}};
  if (mode == ControlMode::adaptive) {
    j["u"] = u;
    j["psi"] = psi.to_json();
  }
  return j;
}

ControlPolicy ControlPolicy::from_json(const nlohmann::json& j, int n) {
  const std::string mode = j.value("mode", std::string("identity"));
  const int q = j.value("q", 2);
  ControlPolicy p;
  if (mode == "identity") {
    p = identity(q);
  } else if (mode == "adaptive") {
    const double u = j.contains("u") ? j.at("u").get<double>() : default_u(n, std::max(q, 1));
    p = adaptive(u, q, j.contains("psi") ? PsiCurve::from_json(j.at("psi")) : PsiCurve{});
  } else {
    fail(ErrorCode::config, "policy.mode must be 'identity' or 'adaptive', got '" + mode + "'");
  }
  p.validate();
  return p;
}

double frozen_tolerance(const Mat& B) { return 1e-9 * std::max(1.0, sym_op_norm(B)); }

namespace {

// Eigenvectors of B strictly below u − tol, and their eigenvalues.
struct FreeBlock {
  Mat basis;
  Vec values;
};

FreeBlock free_block(const Mat& B, double u) {
  const SymEig eig = sym_eig(B);
  const double tol = frozen_tolerance(B);
  std::vector<Index> keep;
  for (Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) < u - tol) keep.push_back(i);
  }
  FreeBlock fb{Mat(B.rows(), static_cast<Index>(keep.size())), Vec(static_cast<Index>(keep.size()))};
  for (std::size_t k = 0; k < keep.size(); ++k) {
    fb.basis.col(static_cast<Index>(k)) = eig.vectors.col(keep[k]);
    fb.values(static_cast<Index>(k)) = eig.values(keep[k]);
  }
  return fb;
}

}  // namespace

ControlMatrix control_matrix(const Mat& A, const Mat& B, const ControlPolicy& policy) {
  const Index n = A.rows();
  require(A.cols() == n && B.rows() == n && B.cols() == n, ErrorCode::argument, "control_matrix: shape mismatch");
  ControlMatrix out;
  if (policy.mode == ControlMode::identity) {
    out.C = Mat::Identity(n, n);
    out.rank = static_cast<int>(n);
    out.frozen_projector = Mat::Zero(n, n);
    out.psi = 1.0;
    return out;
  }
  const FreeBlock fb = free_block(B, policy.u);
  const Index r = fb.basis.cols();
  out.rank = static_cast<int>(r);
  out.frozen_projector = Mat::Identity(n, n) - fb.basis * fb.basis.transpose();
  out.psi = policy.psi(2.0 * static_cast<double>(r));
  if (r == 0) {
    out.C = Mat::Zero(n, n);
    return out;
  }
  // ((I−P)(I+A)(I−P))^† restricted to range(I−P), where it is invertible.
  const Mat block = symmetrize(fb.basis.transpose() * (Mat::Identity(n, n) + A) * fb.basis);
  Eigen::LLT<Mat> llt(block);
  require(llt.info() == Eigen::Success, ErrorCode::linear_algebra, "control block is not positive definite");
  const Mat inv = llt.solve(Mat::Identity(r, r));
  out.C = symmetrize(fb.basis * inv * fb.basis.transpose()) / (out.psi * out.psi);
  return out;
}

double max_step_below_cap(const Mat& B, const ControlMatrix& control, double u) {
  if (control.rank == 0) return std::numeric_limits<double>::infinity();
  const FreeBlock fb = free_block(B, u);
  if (fb.basis.cols() == 0) return std::numeric_limits<double>::infinity();
  const Vec scale = (u - fb.values.array()).rsqrt().matrix();
  const Mat k = scale.asDiagonal() * (fb.basis.transpose() * control.C * fb.basis) * scale.asDiagonal();
  const double top = max_eigenvalue(k);
  return top > 0.0 ? 1.0 / top : std::numeric_limits<double>::infinity();
}

double tilt_log_weight(const Vec& x, const Vec& c, const Mat& B) {
  require(x.size() == c.size() && B.rows() == x.size() && B.cols() == x.size(), ErrorCode::argument,
          "tilt_log_weight: dimension mismatch");
  return c.dot(x) - 0.5 * x.dot(B * x);
}

Ensemble reweight(const Ensemble& base, const Vec& c, const Mat& B) {
  const Index n = base.dim();
  require(c.size() == n && B.rows() == n && B.cols() == n, ErrorCode::argument, "reweight: dimension mismatch");
  const RowMat& x = base.points();
  Vec lw = base.log_weights() + x * c;
  if (!B.isZero(0.0)) lw -= 0.5 * (x * B).cwiseProduct(x).rowwise().sum();
  const double top = lw.maxCoeff();
  const Index alive = (lw.array() > top - 700.0).count();
  if (!std::isfinite(top) || alive < std::min<Index>(2, base.size())) {
    std::ostringstream msg;
    msg << "tilt leaves " << alive << " of " << base.size() << " particles with non-negligible weight";
    fail(ErrorCode::degenerate_tilt, msg.str());
  }
  return base.with_log_weights(std::move(lw));
}

GaussianPosterior gaussian_oracle(const Mat& sigma, const Vec& m, const Vec& c, const Mat& B) {
  const Index n = sigma.rows();
  require(sigma.cols() == n && m.size() == n && c.size() == n && B.rows() == n && B.cols() == n,
          ErrorCode::argument, "gaussian_oracle: dimension mismatch");
  Eigen::LLT<Mat> sig(symmetrize(sigma));
  require(sig.info() == Eigen::Success, ErrorCode::argument, "gaussian_oracle: Sigma must be nonsingular");
  const Mat precision = sig.solve(Mat::Identity(n, n));
  Eigen::LLT<Mat> post(symmetrize(precision + B));
  require(post.info() == Eigen::Success, ErrorCode::rank_deficient, "gaussian_oracle: Sigma^-1 + B is singular");
  GaussianPosterior out;
  out.A = symmetrize(post.solve(Mat::Identity(n, n)));
  out.mu = out.A * (precision * m + c);
  return out;
}

TiltedCloud TiltedCloud::untilted(Ensemble base) {
  const Index n = base.dim();
  return {std::move(base), Vec::Zero(n), Mat::Zero(n, n)};
}

Ensemble TiltedCloud::at(const Vec& c, const Mat& B) const {
  return reweight(particles, c - anchor_c, B - anchor_B);
}

LocState make_state(double t, Vec c, Mat B, const Ensemble& tilted) {
  Moments m = weighted_mean_cov(tilted);
  return {t, std::move(c), std::move(B), std::move(m.mean), std::move(m.cov), tilted.ess()};
}

LocState initial_state(const Ensemble& base) {
  const Index n = base.dim();
  return make_state(0.0, Vec::Zero(n), Mat::Zero(n, n), base);
}

namespace {

StepOutcome advance(const LocState& state, const TiltedCloud& cloud, const ControlPolicy& policy,
                    ControlMatrix control, double h, Rng& rng, const StepOptions& opts) {
  require(h > 0.0, ErrorCode::argument, "step size must be positive");
  const Index n = state.c.size();
  double h_eff = std::min(h, opts.max_h);
  if (policy.mode == ControlMode::adaptive) h_eff = std::min(h_eff, max_step_below_cap(state.B, control, policy.u));
  require(h_eff > 0.0, ErrorCode::integrator_fault, "effective step collapsed to zero");

  std::normal_distribution<double> normal;
  Vec z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal(rng);
  if (opts.zero_noise) z.setZero();

  const Mat root = psd_sqrt(control.C);
  Vec c = state.c + root * z * std::sqrt(h_eff) + control.C * state.mu * h_eff;
  Mat B = symmetrize(state.B + control.C * h_eff);
  const double low = min_eigenvalue(B);
  if (low < -1e-9) {
    std::ostringstream msg;
    msg << "B lost positive semidefiniteness (min eigenvalue " << low << ") at t=" << state.t + h_eff;
    fail(ErrorCode::integrator_fault, msg.str());
  }
  Ensemble tilted = cloud.at(c, B);
  LocState next = make_state(state.t + h_eff, std::move(c), std::move(B), tilted);
  return {std::move(next), std::move(tilted), std::move(control), h_eff};
}

}  // namespace

StepOutcome step(const LocState& state, const TiltedCloud& cloud, const ControlPolicy& policy, double h, Rng& rng,
                 const StepOptions& opts) {
  return advance(state, cloud, policy, control_matrix(state.A, state.B, policy), h, rng, opts);
}

StepOutcome step(const LocState& state, const Ensemble& base, const ControlPolicy& policy, double h, Rng& rng,
                 const StepOptions& opts) {
  return step(state, TiltedCloud::untilted(base), policy, h, rng, opts);
}

// ---------------------------------------------------------------------------

SetIndicator halfspace_set(std::string name, Vec normal, double offset) {
  return {std::move(name), [normal = std::move(normal), offset](const Vec& x) { return normal.dot(x) >= offset; }};
}

SetIndicator whole_space_set(std::string name) {
  return {std::move(name), [](const Vec&) { return true; }};
}

SetIndicator empty_set(std::string name) {
  return {std::move(name), [](const Vec&) { return false; }};
}

namespace {

bool is_diagonal(const Mat& B) {
  Mat off = B;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, sym_op_norm(B));
}

bool can_refresh(const BaseDensity& base, const Mat& B) {
  if (std::holds_alternative<GaussianKind>(base.kind())) return true;
  if (std::holds_alternative<UniformBoxKind>(base.kind())) return is_diagonal(B);
  return false;
}

// Exact draws from the base tilted by (c, B), restricted to ‖x‖ ≤ R.
RowMat sample_tilted(const BaseDensity& base, const Vec& c, const Mat& B, Index count, Rng& rng) {
  const Index n = base.dim();
  const double radius = base.truncation_radius();
  RowMat out(count, n);
  std::function<Vec()> draw;
  if (const auto* g = std::get_if<GaussianKind>(&base.kind())) {
    const GaussianPosterior post = gaussian_oracle(g->cov, g->mean, c, B);
    Eigen::LLT<Mat> llt(post.A);
    require(llt.info() == Eigen::Success, ErrorCode::linear_algebra, "tilted covariance is not positive definite");
    const Mat factor = llt.matrixL();
    draw = [&, factor, mu = post.mu]() {
      std::normal_distribution<double> normal;
      Vec z(n);
      for (Index i = 0; i < n; ++i) z(i) = normal(rng);
      return Vec(mu + factor * z);
    };
  } else if (const auto* box = std::get_if<UniformBoxKind>(&base.kind())) {
    const Vec diag = B.diagonal().cwiseMax(0.0);
    draw = [&, diag, widths = box->half_widths]() { return sample_tilted_box(widths, c, diag, rng); };
  } else {
    fail(ErrorCode::degenerate_ensemble, "no exact tilted sampler for " + base.kind_name());
  }
  const Index budget = 100 * count;
  Index proposals = 0;
  for (Index i = 0; i < count;) {
    require(proposals++ < budget, ErrorCode::sampling_budget, "refresh: truncation rejected too many proposals");
    Vec x = draw();
    if (x.norm() <= radius) out.row(i++) = x.transpose();
  }
  return out;
}

class Runner {
 public:
  Runner(const BaseDensity& base, const ControlPolicy& policy, const std::vector<SetIndicator>& sets,
         const RunOptions& opts, Trajectory& traj)
      : base_(base), policy_(policy), sets_(sets), opts_(opts), traj_(traj) {}

  void run(double T, int k, std::uint64_t seed) {
    Rng sample_rng = make_stream(seed, streams::base_sample);
    Rng noise = make_stream(seed, streams::sde_noise);
    Rng refresh_rng = make_stream(seed, streams::refresh);

    cloud_ = TiltedCloud::untilted(sample_base(base_, opts_.particles, sample_rng));
    update_membership();
    tilted_ = cloud_.particles;
    state_ = initial_state(tilted_);
    ControlMatrix control = control_matrix(state_.A, state_.B, policy_);
    record(control, 0.0, 0.0, false);

    const double h = T / k;
    const double end = T * (1.0 - 1e-12);
    while (state_.t < end) {
      StepOptions so;
      so.zero_noise = opts_.zero_noise;
      so.max_h = T - state_.t;
      double h_used = 0.0;
      double min_dB = 0.0;
      bool refreshed = false;
      if (control.rank == 0 && policy_.mode == ControlMode::adaptive) {
        // Fully frozen: nothing moves but the clock.
        h_used = std::min(h, so.max_h);
        state_.t += h_used;
      } else {
        StepOutcome out = advance(state_, cloud_, policy_, control, h, noise, so);
        h_used = out.h_used;
        min_dB = h_used * min_eigenvalue(out.control.C);
        state_ = std::move(out.state);
        tilted_ = std::move(out.tilted);
        if (tilted_.ess() < opts_.ess_refresh_fraction * static_cast<double>(opts_.particles)) {
          refreshed = refresh(refresh_rng);
        }
      }
      control = control_matrix(state_.A, state_.B, policy_);
      record(control, h_used, min_dB, refreshed);
    }
  }

 private:
  bool refresh(Rng& rng) {
    if (!can_refresh(base_, state_.B)) {
      std::ostringstream msg;
      msg << "ESS " << tilted_.ess() << " fell below " << opts_.ess_refresh_fraction << "·N at t=" << state_.t
          << " and the " << base_.kind_name() << " base has no exact sampler for this tilt";
      fail(ErrorCode::degenerate_ensemble, msg.str());
    }
    RowMat fresh = sample_tilted(base_, state_.c, state_.B, opts_.particles, rng);
    cloud_ = TiltedCloud{Ensemble::uniform(std::move(fresh)), state_.c, state_.B};
    update_membership();
    tilted_ = cloud_.particles;
    state_ = make_state(state_.t, state_.c, state_.B, tilted_);
    ++refreshes_;
    return true;
  }

  void update_membership() {
    const RowMat& x = cloud_.particles.points();
    membership_.assign(sets_.size(), Vec::Zero(x.rows()));
    for (std::size_t s = 0; s < sets_.size(); ++s) {
      for (Index i = 0; i < x.rows(); ++i) {
        if (sets_[s].contains(x.row(i).transpose())) membership_[s](i) = 1.0;
      }
    }
  }

  void record(const ControlMatrix& control, double h, double min_dB, bool refreshed) {
    TrajectoryRecord rec;
    rec.t = state_.t;
    const SymEig ea = sym_eig(state_.A);
    const Vec la = ea.values.cwiseMax(0.0);
    rec.phi2 = la.squaredNorm();
    rec.phiq = (la.array() - 1.0).pow(traj_.q).sum();
    rec.phiq_plain = la.array().pow(traj_.q).sum();
    rec.opnorm_a = la.maxCoeff();
    const Vec lb = sym_eig(state_.B).values;
    rec.tr_b = lb.sum();
    rec.min_eig_b = lb.minCoeff();
    rec.max_eig_b = lb.maxCoeff();
    rec.r = control.rank;
    rec.ess = tilted_.ess();
    for (const Vec& m : membership_) rec.g.push_back(tilted_.weights().dot(m));

    rec.tr_c = control.C.trace();
    rec.rank_c = numerical_rank(control.C, 1e-10);
    rec.psi_2r = control.psi;
    const Mat a_half = spectral_apply(ea, [](double x) { return std::sqrt(std::max(x, 0.0)); });
    rec.focus = sym_op_norm(a_half * control.C * a_half);
    rec.qv_bound = rec.focus;  // ‖XXᵀ‖ = ‖XᵀX‖ with X = A^{1/2}C^{1/2}
    if (control.rank > 0) {
      const double r = control.rank;
      const double q = traj_.q;
      const double lead = std::pow(r, 1.0 + 1.0 / q) / (control.psi * control.psi);
      const double root_phi = std::pow(std::max(rec.phiq_plain, 0.0), 1.0 / q);
      rec.step_bound_literal = lead / (root_phi + 1.0);
      rec.step_bound_corrected = lead / (root_phi + std::pow(r, 1.0 / q));
    }
    const Mat a2 = state_.A * state_.A;
    rec.tr_a3c = (a2 * state_.A * control.C).trace();
    if (opts_.record_third_moment) {
      rec.third_moment_term = moment_contraction(central_third_moments(tilted_, state_.mu), control.C);
    }
    rec.h = h;
    rec.min_eig_dB = min_dB;
    rec.refreshed = refreshed;
    traj_.records.push_back(std::move(rec));
    if (opts_.keep_snapshots) traj_.A_snapshots.push_back(state_.A);
  }

 public:
  int refreshes() const { return refreshes_; }

 private:
  const BaseDensity& base_;
  const ControlPolicy& policy_;
  const std::vector<SetIndicator>& sets_;
  const RunOptions& opts_;
  Trajectory& traj_;

  TiltedCloud cloud_;
  Ensemble tilted_;
  LocState state_;
  std::vector<Vec> membership_;
  int refreshes_ = 0;
};

}  // namespace

Trajectory run(const BaseDensity& base, const ControlPolicy& policy, double T, int k,
               const std::vector<SetIndicator>& sets, std::uint64_t seed, const RunOptions& opts) {
  policy.validate();
  require(T > 0.0 && std::isfinite(T), ErrorCode::argument, "horizon T must be positive");
  require(k >= 1, ErrorCode::argument, "step count k must be at least 1");
  require(opts.particles >= 2, ErrorCode::argument, "need at least two particles");
  require(opts.ess_refresh_fraction >= 0.0 && opts.ess_refresh_fraction < 1.0, ErrorCode::argument,
          "ess_refresh_fraction must lie in [0, 1)");

  Trajectory traj;
  traj.q = policy.q;
  traj.u = policy.u;
  for (const auto& s : sets) traj.set_names.push_back(s.name);

  Runner runner(base, policy, sets, opts, traj);
  try {
    runner.run(T, k, seed);
  } catch (const Error& err) {
    traj.fault = err.what();
    traj.fault_code = err.code();
  }
  traj.manifest = {{"base", base.to_json()},
                   {"policy", policy.to_json()},
                   {"T", T},
                   {"k", k},
                   {"seed", seed},
                   {"N", opts.particles},
                   {"ess_refresh_fraction", opts.ess_refresh_fraction},
                   {"sets", traj.set_names},
                   {"records", traj.records.size()},
                   {"refreshes", runner.refreshes()},
                   {"fault", traj.fault ? nlohmann::json(*traj.fault) : nlohmann::json(nullptr)}};
  return traj;
}

// ---------------------------------------------------------------------------

PotentialDiagnostics potential_diagnostics(const Trajectory& traj, int window) {
  const int steps = static_cast<int>(traj.records.size()) - 1;
  require(window >= 1, ErrorCode::argument, "window must be at least 1");
  require(window <= steps, ErrorCode::argument,
          "window of " + std::to_string(window) + " steps exceeds the trajectory (" + std::to_string(steps) + ")");
  PotentialDiagnostics out;
  out.third_moment_included = true;
  double best = -std::numeric_limits<double>::infinity();
  for (int start = 0; start + window <= steps; start += window) {
    const auto& r0 = traj.records[start];
    const auto& r1 = traj.records[start + window];
    DriftWindow w;
    w.t0 = r0.t;
    w.t1 = r1.t;
    w.phi0 = r0.phi2;
    const double span = w.t1 - w.t0;
    if (span <= 0.0) continue;
    w.delta_hat = (r1.phi2 - r0.phi2) / span;
    double drift = 0.0, qv = 0.0;
    for (int j = start; j < start + window; ++j) {
      const auto& rj = traj.records[j];
      const double hj = traj.records[j + 1].h;
      double term = -2.0 * rj.tr_a3c;
      if (std::isfinite(rj.third_moment_term)) {
        term += rj.third_moment_term;
      } else {
        out.third_moment_included = false;
      }
      drift += hj * term;
      const double d = traj.records[j + 1].phi2 - rj.phi2;
      qv += d * d;
    }
    w.delta_analytic = drift / span;
    w.quad_var_hat = qv / span;
    if (w.phi0 > 0.0) best = std::max(best, w.delta_hat / std::pow(w.phi0, 1.5));
    out.windows.push_back(w);
  }
  out.fitted_c_prime = std::isfinite(best) ? best : 0.0;
  return out;
}

std::vector<double> quadratic_variation_check(const Trajectory& traj, std::size_t set_index, int window) {
  require(set_index < traj.set_names.size(), ErrorCode::argument, "unknown set index");
  const int steps = static_cast<int>(traj.records.size()) - 1;
  require(window >= 1 && window <= steps, ErrorCode::argument, "window must lie in [1, steps]");
  std::vector<double> ratios;
  for (int start = 0; start + window <= steps; start += window) {
    double realized = 0.0, bound = 0.0, span = 0.0;
    for (int j = start; j < start + window; ++j) {
      const auto& a = traj.records[j];
      const auto& b = traj.records[j + 1];
      const double d = b.g[set_index] - a.g[set_index];
      realized += d * d;
      bound += b.h * a.qv_bound;
      span += b.h;
    }
    if (span <= 0.0) continue;
    ratios.push_back(realized == 0.0 ? 0.0 : safe_ratio(realized / span, bound / span));
  }
  return ratios;
}

}  // namespace sloc
