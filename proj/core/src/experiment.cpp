#include "sloc/experiment.hpp"

#include "sloc/ballwalk.hpp"
#include "sloc/isoperimetry.hpp"
#include "sloc/lcdist.hpp"
#include "sloc/localization.hpp"
#include "sloc/matineq.hpp"
#include "sloc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace sloc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::localize: return "localize";
    case ExperimentKind::inequalities: return "inequalities";
    case ExperimentKind::tensor: return "tensor";
    case ExperimentKind::isoperimetry: return "isoperimetry";
    case ExperimentKind::ballwalk: return "ballwalk";
    case ExperimentKind::suite: return "suite";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::localize, ExperimentKind::inequalities, ExperimentKind::tensor,
                 ExperimentKind::isoperimetry, ExperimentKind::ballwalk, ExperimentKind::suite}) {
    if (s == to_string(k)) return k;
  }
  if (s == "full-suite") return ExperimentKind::suite;
  fail(ErrorCode::config, "unknown experiment kind '" + s + "'");
}

namespace {

const std::set<std::string> kTopLevelKeys = {"kind", "base", "policy", "N", "n", "T", "k", "seeds", "constants",
                                             "output_dir", "sets", "threads", "localize", "inequalities",
                                             "tensor", "isoperimetry", "ballwalk"};

// Accumulates validation problems so one error lists every offending field.
class Problems {
 public:
  template <class F>
  void guard(const std::string& field, F&& f) {
    try {
      f();
    } catch (const json::exception& e) {
      add(field + ": " + e.what());
    } catch (const Error& e) {
      add(field + ": " + e.what());
    }
  }
  void add(std::string msg) { list_.push_back(std::move(msg)); }
  void check(bool ok, const std::string& msg) {
    if (!ok) add(msg);
  }
  void raise() const {
    if (list_.empty()) return;
    std::string msg = "invalid config:";
    for (const auto& p : list_) msg += "\n  - " + p;
    fail(ErrorCode::config, msg);
  }

 private:
  std::vector<std::string> list_;
};

json param_or(const RunConfig& cfg, const char* key, json fallback) {
  return cfg.params.is_object() && cfg.params.contains(key) ? cfg.params.at(key) : fallback;
}

template <class F>
void parallel_for(std::size_t count, int threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  require(out.good(), ErrorCode::io, "cannot write " + p.string());
  out << j.dump(2) << '\n';
}

template <class W>
void write_file(const fs::path& p, W&& writer) {
  std::ofstream out(p);
  require(out.good(), ErrorCode::io, "cannot write " + p.string());
  writer(out);
}

fs::path seed_dir(const RunConfig& cfg, std::uint64_t seed) {
  fs::path d = cfg.output_dir / ("seed_" + std::to_string(seed));
  fs::create_directories(d);
  return d;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double binomial_se(double p, std::size_t m) { return m ? std::sqrt(p * (1.0 - p) / static_cast<double>(m)) : 0.0; }

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

std::vector<SetIndicator> build_sets(const RunConfig& cfg, const BaseDensity& base) {
  std::vector<SetIndicator> out;
  const Index n = base.dim();
  for (const auto& s : cfg.sets) {
    const std::string type = s.value("type", std::string("halfspace"));
    if (type == "all") {
      out.push_back(whole_space_set(s.value("name", std::string("all"))));
      continue;
    }
    Vec normal = s.contains("normal") ? json_vec(s.at("normal")) : Vec(Vec::Unit(n, 0));
    require(normal.size() == n, ErrorCode::config, "sets: normal has the wrong dimension");
    double offset = 0.0;
    if (s.contains("offset")) {
      offset = s.at("offset").get<double>();
    } else if (const auto m = base.analytic_mean()) {
      offset = normal.dot(*m);
    }
    out.push_back(halfspace_set(s.value("name", std::string("halfspace")), normal, offset));
  }
  return out;
}

struct Collected {
  std::vector<CheckResult> checks;
  std::vector<std::string> faults;
  json aggregates = json::object();
};

// Rethrows configuration problems with context and records numerical ones.
template <class F>
void with_context(const std::string& context, std::vector<std::string>& faults, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (exit_code_for(e) == 2) fail(e.code(), context + ": " + e.what());
    faults.push_back(context + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// localize
// ---------------------------------------------------------------------------

struct LocalizeSeed {
  std::optional<std::string> fault;
  bool finite = true;
  double min_dB = std::numeric_limits<double>::infinity();
  double max_eig_b = 0.0;
  int rank_mismatches = 0;
  double focus_excess = -std::numeric_limits<double>::infinity();
  double step_literal_deficit = -std::numeric_limits<double>::infinity();
  double step_corrected_deficit = -std::numeric_limits<double>::infinity();
  double oracle_ratio = 0.0;
  double max_phi2 = 0.0;
  double max_phiq_plain = 0.0;
  bool frozen = false;
  std::vector<double> g0, gT;
  double qv_median = 0.0;
  double drift_ratio = std::numeric_limits<double>::quiet_NaN();
  double fitted_c_prime = std::numeric_limits<double>::quiet_NaN();
};

LocalizeSeed localize_one(const RunConfig& cfg, const BaseDensity& base, const ControlPolicy& policy, double T,
                          std::uint64_t seed) {
  const auto sets = build_sets(cfg, base);
  RunOptions opts;
  opts.particles = cfg.N;
  opts.record_third_moment = param_or(cfg, "record_third_moment", false).get<bool>();
  opts.ess_refresh_fraction = param_or(cfg, "ess_refresh_fraction", 0.1).get<double>();
  opts.keep_snapshots = true;
  const Trajectory traj = run(base, policy, T, cfg.k, sets, seed, opts);

  LocalizeSeed s;
  s.fault = traj.fault;
  const bool adaptive = policy.mode == ControlMode::adaptive;
  const double n = base.dim();
  std::optional<Mat> prior_precision;
  if (!adaptive && std::holds_alternative<GaussianKind>(base.kind())) prior_precision = base.analytic_cov()->inverse();
  const double oracle_tol = 5.0 * std::sqrt(n / static_cast<double>(cfg.N));

  for (std::size_t i = 0; i < traj.records.size(); ++i) {
    const auto& r = traj.records[i];
    for (double v : {r.t, r.phi2, r.phiq, r.phiq_plain, r.opnorm_a, r.tr_b, r.min_eig_b, r.max_eig_b, r.ess, r.tr_c,
                     r.focus, r.step_bound_literal, r.step_bound_corrected, r.qv_bound, r.tr_a3c}) {
      if (!std::isfinite(v)) s.finite = false;
    }
    for (double g : r.g) {
      if (!std::isfinite(g)) s.finite = false;
    }
    if (i > 0) s.min_dB = std::min(s.min_dB, r.min_eig_dB);
    s.max_eig_b = std::max(s.max_eig_b, r.max_eig_b);
    s.max_phi2 = std::max(s.max_phi2, r.phi2);
    s.max_phiq_plain = std::max(s.max_phiq_plain, r.phiq_plain);
    if (adaptive) {
      if (r.rank_c != r.r) ++s.rank_mismatches;
      s.focus_excess = std::max(s.focus_excess, r.focus - 1.0 / (r.psi_2r * r.psi_2r));
      s.step_literal_deficit = std::max(s.step_literal_deficit, r.step_bound_literal - r.tr_c);
      s.step_corrected_deficit = std::max(s.step_corrected_deficit, r.step_bound_corrected - r.tr_c);
    }
    if (prior_precision && i < traj.A_snapshots.size()) {
      const Mat oracle = (*prior_precision + r.t * Mat::Identity(base.dim(), base.dim())).inverse();
      s.oracle_ratio = std::max(s.oracle_ratio, op_norm(traj.A_snapshots[i] - oracle) / oracle_tol);
    }
  }
  if (!traj.records.empty()) {
    s.g0 = traj.records.front().g;
    s.gT = traj.final().g;
    const auto& f = traj.final();
    s.frozen = adaptive && traj.ok() && std::abs(f.min_eig_b - policy.u) <= 1e-6 && std::abs(f.max_eig_b - policy.u) <= 1e-6;
  }
  const int window = param_or(cfg, "drift_window", 10).get<int>();
  if (traj.ok() && static_cast<int>(traj.records.size()) > window) {
    if (!sets.empty()) {
      auto q = quadratic_variation_check(traj, 0, window);
      if (!q.empty()) {
        std::nth_element(q.begin(), q.begin() + q.size() / 2, q.end());
        s.qv_median = q[q.size() / 2];
      }
    }
    const auto pd = potential_diagnostics(traj, window);
    double num = 0.0, den = 0.0;
    for (const auto& w : pd.windows) {
      num += w.delta_hat;
      den += w.delta_analytic;
    }
    if (den != 0.0) s.drift_ratio = num / den;
    s.fitted_c_prime = pd.fitted_c_prime;
  }

  const fs::path dir = seed_dir(cfg, seed);
  write_file(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
  write_file(dir / "control.csv", [&](std::ostream& o) { write_control_csv(o, traj); });
  json m = traj.manifest;
  m["kind"] = "localize";
  m["n"] = base.dim();
  m["max_phi2"] = s.max_phi2;
  m["max_phiq_plain"] = s.max_phiq_plain;
  m["adaptive"] = adaptive;
  m["frozen"] = s.frozen;
  m["set_names"] = traj.set_names;
  m["g0"] = s.g0;
  m["gT"] = s.gT;
  write_json(dir / "manifest.json", m);
  return s;
}

Collected run_localize(const RunConfig& cfg) {
  const BaseDensity base = BaseDensity::from_json(cfg.base);
  json pj = cfg.policy;
  if (!pj.contains("q")) pj["q"] = cfg.constants.q;
  if (!pj.contains("u") && cfg.constants.u) pj["u"] = *cfg.constants.u;
  if (!pj.contains("psi")) pj["psi"] = {{"kappa", cfg.constants.kappa}};
  const ControlPolicy policy = ControlPolicy::from_json(pj, base.dim());
  const double T = cfg.horizon();
  const bool adaptive = policy.mode == ControlMode::adaptive;

  std::vector<LocalizeSeed> seeds(cfg.seeds.size());
  Collected c;
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    seeds[i] = localize_one(cfg, base, policy, T, cfg.seeds[i]);
  });
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i].fault) c.faults.push_back("localize seed " + std::to_string(cfg.seeds[i]) + ": " + *seeds[i].fault);
  }

  const std::size_t m_seeds = seeds.size();
  auto all = [&](auto pred) { return std::all_of(seeds.begin(), seeds.end(), pred); };
  auto max_of = [&](auto field) {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& s : seeds) v = std::max(v, field(s));
    return v;
  };

  c.checks.push_back(asserted_le("localize.records_finite", all([](const auto& s) { return s.finite; }) ? 0.0 : 1.0,
                                 0.0, 0.0, 0.0));
  c.checks.push_back(asserted_le("localize.monotone_B", max_of([](const auto& s) { return -s.min_dB; }), 0.0, 0.0, 1e-9));
  if (adaptive) {
    c.checks.push_back(asserted_le("localize.adaptive_cap", max_of([](const auto& s) { return s.max_eig_b; }),
                                   policy.u, 0.0, 1e-8));
    c.checks.push_back(asserted_le("localize.rank_law",
                                   max_of([](const auto& s) { return static_cast<double>(s.rank_mismatches); }), 0.0,
                                   0.0, 0.0));
    c.checks.push_back(
        asserted_le("localize.focus_bound", max_of([](const auto& s) { return s.focus_excess; }), 0.0, 0.0, 1e-8));
    c.checks.push_back(asserted_le("localize.step_bound", max_of([](const auto& s) { return s.step_literal_deficit; }),
                                   0.0, 0.0, 1e-8));
    c.checks.push_back(
        reported("localize.step_bound_corrected", max_of([](const auto& s) { return s.step_corrected_deficit; }), 0.0));
    std::vector<double> hits;
    long frozen = 0;
    for (const auto& s : seeds) {
      hits.push_back(s.max_phiq_plain >= 2.0 * base.dim() ? 1.0 : 0.0);
      frozen += s.frozen ? 1 : 0;
    }
    const double f = mean_of(hits);
    c.checks.push_back(asserted_le("localize.controlled_potential", f, 0.05, binomial_se(f, m_seeds), 0.0));
    const double frac = static_cast<double>(frozen) / static_cast<double>(m_seeds);
    c.checks.push_back(asserted_le("localize.termination", 0.9, frac, binomial_se(frac, m_seeds), 0.0));
  } else {
    std::vector<double> hits;
    for (const auto& s : seeds) hits.push_back(s.max_phi2 >= 8.0 * base.dim() ? 1.0 : 0.0);
    const double f = mean_of(hits);
    c.checks.push_back(asserted_le("localize.potential_bound", f, 0.05, binomial_se(f, m_seeds), 0.0));
    if (std::holds_alternative<GaussianKind>(base.kind())) {
      c.checks.push_back(asserted_le("localize.gaussian_oracle",
                                     max_of([](const auto& s) { return s.oracle_ratio; }), 1.0, 0.0, 0.0));
    }
  }

  const auto sets = build_sets(cfg, base);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    std::vector<double> diff, inside;
    for (const auto& s : seeds) {
      if (s.g0.size() <= k || s.gT.size() <= k) continue;
      diff.push_back(s.gT[k] - s.g0[k]);
      inside.push_back(s.gT[k] >= 0.25 && s.gT[k] <= 0.75 ? 1.0 : 0.0);
    }
    const std::string name = "localize.martingale:" + sets[k].name;
    const double se = se_of(diff);
    if (diff.size() >= 2) {
      c.checks.push_back(asserted_le(name, std::abs(mean_of(diff)), 0.0, se, 3.0 * se));
    } else {
      c.checks.push_back(reported(name, std::abs(mean_of(diff)), 0.0, se));
    }
    c.checks.push_back(reported("localize.volume_event:" + sets[k].name, mean_of(inside), 0.9,
                                binomial_se(mean_of(inside), inside.size())));
  }

  std::vector<double> qv, drift, cprime;
  for (const auto& s : seeds) {
    qv.push_back(s.qv_median);
    if (std::isfinite(s.drift_ratio)) drift.push_back(s.drift_ratio);
    if (std::isfinite(s.fitted_c_prime)) cprime.push_back(s.fitted_c_prime);
  }
  c.checks.push_back(reported("localize.qv_ratio_median", mean_of(qv), 1.0, se_of(qv)));
  c.checks.push_back(reported("localize.drift_ratio", mean_of(drift), 1.0, se_of(drift)));
  c.checks.push_back(reported("localize.fitted_c_prime",
                              cprime.empty() ? 0.0 : *std::max_element(cprime.begin(), cprime.end()), 0.0));
  c.aggregates = {{"T", T}, {"u", policy.u}, {"seeds", m_seeds}};
  return c;
}

// ---------------------------------------------------------------------------
// inequalities
// ---------------------------------------------------------------------------

Collected run_inequalities(const RunConfig& cfg) {
  const int trials = param_or(cfg, "trials", 10000).get<int>();
  const int max_n = param_or(cfg, "max_n", 12).get<int>();
  const int pi_trials = param_or(cfg, "projected_inverse_trials", 1000).get<int>();
  const std::vector<std::string> names = {"trace_holder", "lieb_thirring", "eldan_lieb"};

  std::vector<std::vector<SuiteReport>> reports(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    json out = json::array();
    for (const auto& which : names) reports[i].push_back(run_inequality_suite(which, trials, seed, max_n));
    reports[i].push_back(run_projected_inverse_suite(pi_trials, seed, max_n));
    for (const auto& r : reports[i]) out.push_back(r.to_json());
    write_json(seed_dir(cfg, seed) / "inequalities.json", out);
  });

  Collected c;
  for (std::size_t k = 0; k < names.size() + 1; ++k) {
    double worst = 0.0, worst_scaled = 0.0;
    int failures = 0;
    for (const auto& rs : reports) {
      worst = std::max(worst, rs[k].max_violation);
      failures += rs[k].failures;
      if (rs[k].extra.contains("max_violation_scaled")) {
        worst_scaled = std::max(worst_scaled, rs[k].extra.at("max_violation_scaled").get<double>());
      }
    }
    if (k < names.size()) {
      c.checks.push_back(asserted_le("inequalities." + names[k], worst, 1e-8, 0.0, 0.0));
    } else {
      c.checks.push_back(asserted_le("inequalities.projected_inverse", worst, 1.0, 0.0, 0.0));
      c.checks.push_back(reported("inequalities.projected_inverse_scaled", worst_scaled, 1.0));
    }
    c.aggregates[k < names.size() ? names[k] : "projected_inverse"] = {{"max_violation", worst},
                                                                        {"failures", failures}};
  }
  return c;
}

// ---------------------------------------------------------------------------
// tensor
// ---------------------------------------------------------------------------

Collected run_tensor(const RunConfig& cfg) {
  const BaseDensity base = BaseDensity::from_json(cfg.base);
  const Index n = base.dim();
  const int instances = param_or(cfg, "instances", 50).get<int>();
  const int triples = param_or(cfg, "tequ_triples", 100).get<int>();
  const Index tequ_points = param_or(cfg, "tequ_points", 400).get<Index>();
  const PsiCurve psi{cfg.constants.kappa, 0.25};

  std::vector<Collected> per(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    Collected& c = per[i];
    with_context("tensor seed " + std::to_string(seed), c.faults, [&] {
      const Ensemble cloud = whiten(sample_base(base, cfg.N, seed)).ensemble;
      RandomMatrixStream psd(InstanceKind::psd, n, instance_seed(seed, 1));
      RandomMatrixStream sym(InstanceKind::sym, n, instance_seed(seed, 2));
      const double scale = 1.0 / static_cast<double>(n);

      const Ensemble small = Ensemble::uniform(cloud.points().topRows(std::min(tequ_points, cloud.size())));
      double tequ_gap = 0.0;
      for (int t = 0; t < triples; ++t) {
        tequ_gap = std::max(tequ_gap, tequ_check(small, sym.next(), sym.next()).max_rel_gap());
      }
      c.checks.push_back(asserted_le("tensor.tequ", tequ_gap, 1e-8, 0.0, 0.0));

      std::vector<MatrixTriple> psd_triples, sym_triples;
      for (int t = 0; t < 3; ++t) {
        psd_triples.push_back({scale * psd.next(), scale * psd.next(), scale * psd.next()});
        sym_triples.push_back({scale * sym.next(), scale * sym.next(), scale * sym.next()});
      }
      for (auto& r : trabs_check(cloud, psd_triples, sym_triples)) {
        r.name = "tensor.trabs";
        c.checks.push_back(r);
      }
      Rng alpha_rng = make_stream(seed, streams::directions);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int t = 0; t < instances; ++t) {
        const Mat A = scale * psd.next(), B = scale * psd.next(), C = scale * psd.next();
        for (auto& r : tinq_report(cloud, A, B, psi)) {
          if (r.name == "tinq_7") {
            r.name = "tensor.tinq_7";
            c.checks.push_back(r);
          } else if (t == 0) {
            r.name = "tensor." + r.name;
            c.checks.push_back(r);
          }
        }
        CheckResult lt = liebtr_check(cloud, A, B, C, unit(alpha_rng));
        lt.name = "tensor.liebtr";
        c.checks.push_back(lt);
      }

      const ThirdMomentCube cube = third_moment_cube(cloud);
      const TensorEstimate pairs = tensor_T(cloud, Mat::Identity(n, n), Mat::Identity(n, n), Mat::Identity(n, n));
      // The plug-in cube is biased upward by about E‖x‖⁶/N.
      const double bias = cloud.weights().dot(cloud.points().rowwise().squaredNorm().array().cube().matrix()) /
                          static_cast<double>(cloud.size());
      c.checks.push_back(asserted_le("tensor.cube_vs_pairs", std::abs(cube.value - pairs.value), 0.0, pairs.std_error,
                                     3.0 * pairs.std_error + bias));
      c.checks.push_back(reported("tensor.third_moment_cube", cube.value, static_cast<double>(n * n * n) / cfg.N));
      const NormRatio nr = tensor_norm_ratio(cloud);
      c.checks.push_back(reported("tensor.norm_ratio", nr.ratio, 1.0, nr.std_error));
      Vec v = Vec::Ones(n).normalized();
      Mat P = Mat::Zero(n, n);
      P(0, 0) = 1.0;
      CheckResult d = trDAD_projection_check(cloud, v, P, psi);
      d.name = "tensor.trDAD_projection";
      c.checks.push_back(d);
      write_json(seed_dir(cfg, seed) / "tensor.json",
                 json{{"cube", cube.value}, {"pairs", pairs.value}, {"pairs_se", pairs.std_error}, {"norm_ratio", nr.ratio}});
    });
  });

  // Collapse repeated names to the worst instance.
  Collected c;
  std::vector<CheckResult> merged;
  for (auto& p : per) {
    c.faults.insert(c.faults.end(), p.faults.begin(), p.faults.end());
    for (auto& r : p.checks) {
      auto it = std::find_if(merged.begin(), merged.end(), [&](const CheckResult& m) { return m.name == r.name; });
      if (it == merged.end()) {
        merged.push_back(r);
      } else if (r.failed() && !it->failed()) {
        *it = r;
      } else if (r.failed() == it->failed() && r.ratio > it->ratio) {
        *it = r;
      }
    }
  }
  c.checks = std::move(merged);
  return c;
}

// ---------------------------------------------------------------------------
// isoperimetry
// ---------------------------------------------------------------------------

Collected run_isoperimetry(const RunConfig& cfg) {
  const BaseDensity base = BaseDensity::from_json(cfg.base);
  const Index n = base.dim();
  const int directions = param_or(cfg, "directions", 16).get<int>();
  const auto t_grid = param_or(cfg, "t_grid", json::array({1.0, 4.0, 16.0})).get<std::vector<double>>();
  const PsiCurve psi{cfg.constants.kappa, 0.25};

  Collected c;
  const json kj = param_or(cfg, "kls", json::object());
  const KlsTable kls = kls_recursion(kj.value("alpha1", 1.0), kj.value("beta1", 0.5), kj.value("n", 1e6),
                                     kj.value("iterations", 10000), kj.value("C", 1.0));
  c.checks.push_back(asserted_le("isoperimetry.kls_beta", kls.beta_within_16_over_ell && kls.beta_decreasing ? 0.0 : 1.0,
                                 0.0, 0.0, 0.0));
  c.checks.push_back(asserted_le("isoperimetry.kls_unimodal", kls.unimodal ? 0.0 : 1.0, 0.0, 0.0, 0.0));
  c.aggregates["kls"] = {{"best_ell", kls.best_ell}, {"best_log_bound", kls.best_log_bound}};

  std::vector<Collected> per(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    Collected& pc = per[i];
    with_context("isoperimetry seed " + std::to_string(seed), pc.faults, [&] {
      const Ensemble cloud = sample_base(base, cfg.N, seed);
      const BestCut best = best_halfspace_expansion(cloud, directions, seed);
      pc.checks.push_back(reported("isoperimetry.psi_estimate", best.psi_estimate, psi(static_cast<double>(n))));
      for (double t : t_grid) {
        const Mat B = t * Mat::Identity(n, n);
        const GaussianFactor gf = gaussian_factor_expansion(base, B, reweight(cloud, Vec::Zero(n), B), directions, seed);
        pc.checks.push_back(asserted_le("isoperimetry.gaussian_factor", gf.floor, gf.ratio, 0.0, 0.0));
      }
      const PoincareRatio pr = poincare_ratio(cloud, Mat::Identity(n, n), psi);
      pc.checks.push_back(reported("isoperimetry.poincare_identity", pr.ratio, pr.psi_sq));

      const Ensemble iso = whiten(cloud).ensemble;
      for (int k = 1; k <= 4; ++k) {
        pc.checks.push_back(asserted_le("lcdist.moment_ratio", moment_ratio(iso, k), 1.0, 0.0, 0.0));
      }
      for (double t : {2.0, 3.0, 4.0}) {
        const TailSmallBall ts = tail_and_smallball(iso, t, 0.5);
        const double se = binomial_se(ts.tail_prob, static_cast<std::size_t>(iso.ess()));
        pc.checks.push_back(asserted_le("lcdist.tail_bound", ts.tail_prob, ts.tail_bound, se, 3.0 * se));
      }
      pc.checks.push_back(reported("lcdist.thin_shell_sigma", thin_shell_sigma(iso), 1.0));

      const fs::path dir = seed_dir(cfg, seed);
      write_file(dir / "cuts.csv", [&](std::ostream& o) { write_cuts_csv(o, best); });
      write_json(dir / "isoperimetry.json", to_json(best));
    });
  });
  for (auto& p : per) {
    c.faults.insert(c.faults.end(), p.faults.begin(), p.faults.end());
    c.checks.insert(c.checks.end(), p.checks.begin(), p.checks.end());
  }
  return c;
}

// ---------------------------------------------------------------------------
// ballwalk
// ---------------------------------------------------------------------------

double quantile(std::vector<double> v, double p) {
  const std::size_t k = std::min(v.size() - 1, static_cast<std::size_t>(p * static_cast<double>(v.size())));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

Collected run_ballwalk(const RunConfig& cfg) {
  const BaseDensity base = BaseDensity::from_json(cfg.base);
  const Index n = base.dim();
  const json bj = cfg.params.is_object() ? cfg.params : json::object();
  const auto checkpoints = bj.value("checkpoints", std::vector<long>{10, 100, 1000, 10000});
  const int replicas = bj.value("replicas", 200);
  const Index transitions = bj.value("db_transitions", Index{200000});

  std::vector<Collected> per(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    Collected& pc = per[i];
    with_context("ballwalk seed " + std::to_string(seed), pc.faults, [&] {
      json chain_json = bj;
      chain_json["seed"] = seed;
      chain_json.erase("checkpoints");
      chain_json.erase("replicas");
      chain_json.erase("db_transitions");
      if (!chain_json.contains("steps")) chain_json["steps"] = 20000;
      if (!chain_json.contains("burn_in")) chain_json["burn_in"] = 1000;
      const bool far_start = !chain_json.contains("start") || chain_json["start"] == "far";
      chain_json.erase("start");
      ChainConfig cc = ChainConfig::from_json(chain_json);

      Rng ref_rng = make_stream(seed, streams::base_sample);
      const Ensemble ref = sample_base(base, 1000, ref_rng);
      std::vector<double> proj(static_cast<std::size_t>(ref.size()));
      for (Index r = 0; r < ref.size(); ++r) proj[r] = ref.point(r)(0);

      const ChainResult chain = run_chain(cc, base);
      const double median = quantile(proj, 0.5);
      const double cond = conductance_estimate(chain.states, [median](const Vec& x) { return x(0) >= median; });
      pc.checks.push_back(asserted_le("ballwalk.conductance_positive", 1e-12, cond, 0.0, 0.0));
      pc.checks.push_back(reported("ballwalk.acceptance", chain.acceptance_rate.value_or(0.0), 1.0));

      const Stationarity st = stationarity_check(cc, base, checkpoints, replicas, Vec::Unit(n, 0));
      pc.checks.push_back(asserted_le("ballwalk.stationarity", st.max_drift_z, 3.0, 0.0, 0.0));
      pc.checks.push_back(reported("ballwalk.stationarity_vs_exact", st.max_z, 3.0));

      ChainConfig from_point = cc;
      if (far_start) {
        const auto far = std::max_element(proj.begin(), proj.end()) - proj.begin();
        from_point.start = ref.point(far).transpose();
      } else {
        from_point.start = json_vec(bj.at("start"));
      }
      TvOptions tv_opts;
      tv_opts.checkpoints = checkpoints;
      tv_opts.replicas = replicas;
      const auto rows = tv_decay(from_point, base, tv_opts);
      const MonotoneVerdict mono = monotone_up_to_noise(rows, rows.front().noise_floor);
      pc.checks.push_back(asserted_le("ballwalk.tv_monotone", mono.worst_increase, 0.0, 0.0, mono.slack));
      pc.checks.push_back(asserted_le("ballwalk.tv_decreases", rows.back().tv, rows.front().tv, 0.0, 0.0));

      const DetailedBalance db =
          detailed_balance_check(base, cc.delta_for(static_cast<int>(n)), Vec::Unit(n, 0), quantile(proj, 0.2),
                                 quantile(proj, 0.5), quantile(proj, 0.5), quantile(proj, 0.65), transitions, seed);
      pc.checks.push_back(asserted_le("ballwalk.detailed_balance", std::abs(db.flow_ab - db.flow_ba), 0.0, db.se,
                                      3.0 * db.se));

      const fs::path dir = seed_dir(cfg, seed);
      write_file(dir / "chain.csv", [&](std::ostream& o) { write_chain_csv(o, chain); });
      write_json(dir / "ballwalk.json",
                 json{{"acceptance", chain.acceptance_rate ? json(*chain.acceptance_rate) : json(nullptr)},
                      {"conductance", cond},
                      {"tv_table", tv_to_json(rows)},
                      {"stationarity_max_z", st.max_z},
                      {"stationarity_max_drift_z", st.max_drift_z},
                      {"detailed_balance_z", db.z}});
    });
  });
  Collected c;
  for (auto& p : per) {
    c.faults.insert(c.faults.end(), p.faults.begin(), p.faults.end());
    c.checks.insert(c.checks.end(), p.checks.begin(), p.checks.end());
  }
  return c;
}

Collected run_kind(const RunConfig& cfg);

Collected run_suite(const RunConfig& cfg) {
  Collected c;
  struct Part {
    std::string name;
    ExperimentKind kind;
    json policy;
  };
  const std::vector<Part> parts = {{"inequalities", ExperimentKind::inequalities, cfg.policy},
                                   {"tensor", ExperimentKind::tensor, cfg.policy},
                                   {"isoperimetry", ExperimentKind::isoperimetry, cfg.policy},
                                   {"ballwalk", ExperimentKind::ballwalk, cfg.policy},
                                   {"localize_identity", ExperimentKind::localize, json{{"mode", "identity"}}},
                                   {"localize_adaptive", ExperimentKind::localize, json{{"mode", "adaptive"}}}};
  for (const auto& part : parts) {
    RunConfig sub = cfg;
    sub.kind = part.kind;
    sub.policy = part.policy;
    sub.output_dir = cfg.output_dir / part.name;
    sub.params = cfg.blocks.value(std::string(to_string(part.kind)), json::object());
    fs::create_directories(sub.output_dir);
    Collected r = run_kind(sub);
    for (auto& chk : r.checks) {
      chk.name = part.name + "/" + chk.name;
      c.checks.push_back(std::move(chk));
    }
    c.faults.insert(c.faults.end(), r.faults.begin(), r.faults.end());
    c.aggregates[part.name] = r.aggregates;
  }
  return c;
}

Collected run_kind(const RunConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::localize: return run_localize(cfg);
    case ExperimentKind::inequalities: return run_inequalities(cfg);
    case ExperimentKind::tensor: return run_tensor(cfg);
    case ExperimentKind::isoperimetry: return run_isoperimetry(cfg);
    case ExperimentKind::ballwalk: return run_ballwalk(cfg);
    case ExperimentKind::suite: return run_suite(cfg);
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j) {
  Problems p;
  RunConfig c;
  require(j.is_object(), ErrorCode::config, "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) p.check(kTopLevelKeys.count(it.key()) > 0, "unknown key '" + it.key() + "'");

  p.guard("kind", [&] {
    require(j.contains("kind"), ErrorCode::config, "required");
    c.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  });
  p.guard("n", [&] {
    c.n = j.value("n", c.n);
    require(c.n >= 1, ErrorCode::config, "must be at least 1");
  });
  p.guard("N", [&] {
    c.N = j.value("N", c.N);
    require(c.N >= 2, ErrorCode::config, "must be at least 2");
  });
  p.guard("k", [&] {
    c.k = j.value("k", c.k);
    require(c.k >= 1, ErrorCode::config, "must be at least 1");
  });
  p.guard("T", [&] {
    if (j.contains("T") && !j.at("T").is_null()) {
      c.T = j.at("T").get<double>();
      require(*c.T > 0.0 && std::isfinite(*c.T), ErrorCode::config, "must be positive");
    }
  });
  p.guard("threads", [&] {
    c.threads = j.value("threads", 1);
    require(c.threads >= 1, ErrorCode::config, "must be at least 1");
  });
  p.guard("seeds", [&] {
    const json s = j.value("seeds", json::array({0}));
    if (s.is_object()) {
      const auto first = s.value("start", std::uint64_t{0});
      const auto count = s.value("count", 0L);
      require(count >= 1, ErrorCode::config, "seeds.count must be at least 1");
      for (long i = 0; i < count; ++i) c.seeds.push_back(first + static_cast<std::uint64_t>(i));
    } else {
      c.seeds = s.get<std::vector<std::uint64_t>>();
    }
    require(!c.seeds.empty(), ErrorCode::config, "must be non-empty");
  });
  p.guard("constants", [&] {
    const json k = j.value("constants", json::object());
    c.constants.c1 = k.value("c1", c.constants.c1);
    c.constants.T_max_coeff = k.value("T_max_coeff", c.constants.T_max_coeff);
    if (k.contains("u") && !k.at("u").is_null()) c.constants.u = k.at("u").get<double>();
    c.constants.kappa = k.value("kappa", c.constants.kappa);
    c.constants.q = k.value("q", c.constants.q);
    require(c.constants.c1 > 0.0, ErrorCode::config, "c1 must be positive");
    require(c.constants.T_max_coeff > 0.0, ErrorCode::config, "T_max_coeff must be positive");
    require(!c.constants.u || *c.constants.u > 0.0, ErrorCode::config, "u must be positive");
    require(c.constants.kappa > 0.0, ErrorCode::config, "kappa must be positive");
    require(c.constants.q >= 1, ErrorCode::config, "q must be at least 1");
  });
  p.guard("base", [&] {
    c.base = j.value("base", json{{"kind", "gaussian"}});
    if (c.base.is_object() && !c.base.contains("n") && !c.base.contains("mean") && !c.base.contains("half_widths")) {
      c.base["n"] = c.n;
    }
    const BaseDensity b = BaseDensity::from_json(c.base);
    c.n = b.dim();
  });
  p.guard("policy", [&] {
    c.policy = j.value("policy", json{{"mode", "identity"}});
    json pj = c.policy;
    if (!pj.contains("q")) pj["q"] = c.constants.q;
    if (!pj.contains("u") && c.constants.u) pj["u"] = *c.constants.u;
    ControlPolicy::from_json(pj, c.n);
  });
  p.guard("sets", [&] {
    c.sets = j.value("sets", json::array({json{{"type", "halfspace"}, {"name", "x1_pos"}}}));
    require(c.sets.is_array(), ErrorCode::config, "must be an array");
    for (const auto& s : c.sets) {
      const std::string type = s.value("type", std::string("halfspace"));
      require(type == "halfspace" || type == "all", ErrorCode::config, "unknown set type '" + type + "'");
      if (s.contains("normal")) {
        require(s.at("normal").size() == static_cast<std::size_t>(c.n), ErrorCode::config,
                "normal must have n entries");
      }
    }
  });
  p.guard("output_dir", [&] {
    c.output_dir = j.contains("output_dir") ? fs::path(j.at("output_dir").get<std::string>()) : default_output_dir();
  });
  for (const char* key : {"localize", "inequalities", "tensor", "isoperimetry", "ballwalk"}) {
    p.guard(key, [&] {
      if (j.contains(key)) require(j.at(key).is_object(), ErrorCode::config, "must be an object");
    });
  }
  p.raise();
  c.blocks = json::object();
  for (const char* key : {"localize", "inequalities", "tensor", "isoperimetry", "ballwalk"}) {
    if (j.contains(key)) c.blocks[key] = j.at(key);
  }
  c.params = c.blocks.value(std::string(to_string(c.kind)), json::object());
  return c;
}

json RunConfig::to_json() const {
  json j{{"kind", std::string(to_string(kind))},
         {"base", base},
         {"policy", policy},
         {"N", N},
         {"n", n},
         {"k", k},
         {"seeds", seeds},
         {"constants",
          {{"c1", constants.c1},
           {"T_max_coeff", constants.T_max_coeff},
           {"u", constants.u ? json(*constants.u) : json(nullptr)},
           {"kappa", constants.kappa},
           {"q", constants.q}}},
         {"output_dir", output_dir.string()},
         {"sets", sets},
         {"threads", threads}};
  if (T) j["T"] = *T;
  for (auto it = blocks.begin(); it != blocks.end(); ++it) j[it.key()] = it.value();
  if (kind != ExperimentKind::suite && !params.empty()) j[std::string(to_string(kind))] = params;
  return j;
}

double RunConfig::horizon() const {
  if (T) return *T;
  const std::string mode = policy.value("mode", std::string("identity"));
  const int q = policy.value("q", constants.q);
  if (mode == "adaptive") return constants.T_max_coeff / (static_cast<double>(q) * q);
  return constants.c1 / std::sqrt(static_cast<double>(n));
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::not_found, "config file " + path.string() + " not found");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config, "config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j);
}

fs::path default_output_dir() {
  const char* env = std::getenv("SLOC_OUTPUT_DIR");
  return env && *env ? fs::path(env) : fs::path("sloc-out");
}

int exit_code_for(const Error& e) noexcept {
  switch (e.code()) {
    case ErrorCode::config:
    case ErrorCode::argument:
    case ErrorCode::not_found:
    case ErrorCode::io:
    case ErrorCode::cost_guard: return 2;
    default: return 3;
  }
}

ExperimentResult run_experiment(const RunConfig& config) {
  fs::create_directories(config.output_dir);
  Collected c = run_kind(config);
  ExperimentResult r;
  r.kind = config.kind;
  r.checks = std::move(c.checks);
  r.faults = std::move(c.faults);
  const bool any_failed = std::any_of(r.checks.begin(), r.checks.end(), [](const CheckResult& x) { return x.failed(); });
  r.exit_code = !r.faults.empty() ? 3 : any_failed ? 1 : 0;
  json checks = json::array();
  for (const auto& x : r.checks) checks.push_back(x.to_json());
  r.summary = {{"kind", std::string(to_string(config.kind))},
               {"config", config.to_json()},
               {"checks", checks},
               {"faults", r.faults},
               {"aggregates", c.aggregates},
               {"exit_code", r.exit_code}};
  write_json(config.output_dir / "summary.json", r.summary);
  return r;
}

const std::vector<CatalogEntry>& asserted_check_catalog() {
  static const std::vector<CatalogEntry> catalog = {
      {"localize.records_finite", ExperimentKind::localize},
      {"localize.monotone_B", ExperimentKind::localize},
      {"localize.adaptive_cap", ExperimentKind::localize},
      {"localize.rank_law", ExperimentKind::localize},
      {"localize.focus_bound", ExperimentKind::localize},
      {"localize.step_bound", ExperimentKind::localize},
      {"localize.controlled_potential", ExperimentKind::localize},
      {"localize.termination", ExperimentKind::localize},
      {"localize.potential_bound", ExperimentKind::localize},
      {"localize.gaussian_oracle", ExperimentKind::localize},
      {"localize.martingale", ExperimentKind::localize},
      {"inequalities.trace_holder", ExperimentKind::inequalities},
      {"inequalities.lieb_thirring", ExperimentKind::inequalities},
      {"inequalities.eldan_lieb", ExperimentKind::inequalities},
      {"inequalities.projected_inverse", ExperimentKind::inequalities},
      {"tensor.tequ", ExperimentKind::tensor},
      {"tensor.trabs", ExperimentKind::tensor},
      {"tensor.tinq_7", ExperimentKind::tensor},
      {"tensor.liebtr", ExperimentKind::tensor},
      {"tensor.cube_vs_pairs", ExperimentKind::tensor},
      {"isoperimetry.kls_beta", ExperimentKind::isoperimetry},
      {"isoperimetry.kls_unimodal", ExperimentKind::isoperimetry},
      {"isoperimetry.gaussian_factor", ExperimentKind::isoperimetry},
      {"lcdist.moment_ratio", ExperimentKind::isoperimetry},
      {"lcdist.tail_bound", ExperimentKind::isoperimetry},
      {"ballwalk.conductance_positive", ExperimentKind::ballwalk},
      {"ballwalk.stationarity", ExperimentKind::ballwalk},
      {"ballwalk.tv_monotone", ExperimentKind::ballwalk},
      {"ballwalk.tv_decreases", ExperimentKind::ballwalk},
      {"ballwalk.detailed_balance", ExperimentKind::ballwalk},
  };
  return catalog;
}

}  // namespace sloc
