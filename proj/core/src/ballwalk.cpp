#include "sloc/ballwalk.hpp"

#include "sloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <tuple>

namespace sloc {

namespace {

Vec uniform_in_ball(Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec g(n);
  double norm = 0.0;
  do {
    for (Index i = 0; i < n; ++i) g(i) = normal(rng);
    norm = g.norm();
  } while (norm == 0.0);
  return g * (std::pow(unit(rng), 1.0 / static_cast<double>(n)) / norm);
}

Vec exact_draw(const BaseDensity& model, Rng& rng) {
  const Ensemble one = sample_base(model, 1, rng);
  return one.point(0).transpose();
}

Vec start_point(const ChainConfig& cfg, const BaseDensity& model, Rng& rng) {
  if (!cfg.start) return exact_draw(model, rng);
  require(cfg.start->size() == model.dim(), ErrorCode::argument, "chain start has the wrong dimension");
  require(std::isfinite(model.log_density(*cfg.start)), ErrorCode::argument,
          "chain start lies outside the model support");
  return *cfg.start;
}

// Walks `x` forward to each checkpoint and hands the state to `visit`.
template <class Visit>
void walk_to_checkpoints(Vec& x, double delta, const BaseDensity& model, const std::vector<long>& checkpoints, Rng& rng,
                         Visit&& visit) {
  long done = 0;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    for (; done < checkpoints[c]; ++done) x = ball_walk_step(x, delta, model, rng).x;
    visit(c, x);
  }
}

void require_increasing(const std::vector<long>& checkpoints) {
  require(!checkpoints.empty(), ErrorCode::argument, "checkpoints must be non-empty");
  require(checkpoints.front() >= 0, ErrorCode::argument, "checkpoints must be non-negative");
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    require(checkpoints[i] > checkpoints[i - 1], ErrorCode::argument, "checkpoints must be increasing");
  }
}

Vec unit_direction(const std::optional<Vec>& d, Index n) {
  if (!d) return Vec::Unit(n, 0);
  require(d->size() == n && d->norm() > 0.0, ErrorCode::argument, "direction must be a nonzero n-vector");
  return d->normalized();
}

}  // namespace

double ChainConfig::delta_for(int n) const { return delta > 0.0 ? delta : 1.0 / std::sqrt(static_cast<double>(n)); }

void ChainConfig::validate() const {
  require(delta >= 0.0 && std::isfinite(delta), ErrorCode::config, "delta must be positive (0 selects 1/sqrt(n))");
  require(steps >= 0, ErrorCode::config, "steps must be non-negative");
  require(burn_in >= 0, ErrorCode::config, "burn_in must be non-negative");
  require(thin >= 1, ErrorCode::config, "thin must be at least 1");
}

nlohmann::json ChainConfig::to_json() const {
  nlohmann::json j{{"delta", delta}, {"steps", steps}, {"burn_in", burn_in}, {"thin", thin}, {"seed", seed}};
  if (start) {
    j["start"] = std::vector<double>(start->data(), start->data() + start->size());
  } else {
    j["start"] = "warm";
  }
  return j;
}

ChainConfig ChainConfig::from_json(const nlohmann::json& j) {
  ChainConfig c;
  c.delta = j.value("delta", 0.0);
  c.steps = j.value("steps", 1000L);
  c.burn_in = j.value("burn_in", 0L);
  c.thin = j.value("thin", 1L);
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("start") && !(j["start"].is_string() && j["start"] == "warm")) {
    const auto v = j["start"].get<std::vector<double>>();
    c.start = Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
  }
  c.validate();
  return c;
}

WalkStep ball_walk_step(const Vec& x, double delta, const BaseDensity& model, Rng& rng) {
  const Vec y = x + delta * uniform_in_ball(x.size(), rng);
  const double ly = model.log_density(y);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  if (!std::isfinite(ly)) return {x, false};
  const double ratio = ly - model.log_density(x);
  if (ratio >= 0.0 || std::log(u) < ratio) return {y, true};
  return {x, false};
}

ChainResult run_chain(const ChainConfig& cfg, const BaseDensity& model) {
  cfg.validate();
  Rng rng = make_stream(cfg.seed, streams::chain);
  const Index n = model.dim();
  const double delta = cfg.delta_for(static_cast<int>(n));
  ChainResult out;
  out.steps = cfg.steps;
  out.burn_in = cfg.burn_in;
  out.thin = cfg.thin;
  const long kept = cfg.steps > cfg.burn_in ? (cfg.steps - cfg.burn_in) / cfg.thin : 0;
  out.states.resize(kept, n);
  out.accepted.reserve(static_cast<std::size_t>(kept));
  if (cfg.steps == 0) return out;

  Vec x = start_point(cfg, model, rng);
  long accepted = 0;
  Index row = 0;
  for (long s = 1; s <= cfg.steps; ++s) {
    WalkStep st = ball_walk_step(x, delta, model, rng);
    accepted += st.accepted ? 1 : 0;
    x = std::move(st.x);
    if (s > cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0 && row < kept) {
      out.states.row(row++) = x.transpose();
      out.accepted.push_back(st.accepted ? 1 : 0);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.steps);
  return out;
}

double conductance_estimate(const RowMat& path, const PointSet& in_set) {
  require(path.rows() > 1000, ErrorCode::argument, "conductance needs a path longer than 1000 states");
  const Index m = path.rows();
  std::vector<char> inside(static_cast<std::size_t>(m));
  Index visits = 0;
  for (Index i = 0; i < m; ++i) {
    inside[i] = in_set(path.row(i).transpose()) ? 1 : 0;
    visits += inside[i];
  }
  if (visits == 0) fail(ErrorCode::insufficient_visits, "the chain never visited the set");
  Index exits = 0;
  for (Index i = 0; i + 1 < m; ++i) {
    if (inside[i] && !inside[i + 1]) ++exits;
  }
  const double pi_s = static_cast<double>(visits) / static_cast<double>(m);
  const double smaller = std::min(pi_s, 1.0 - pi_s);
  if (smaller == 0.0) return 0.0;
  return (static_cast<double>(exits) / static_cast<double>(m - 1)) / smaller;
}

std::vector<TvRow> tv_decay(const ChainConfig& cfg, const BaseDensity& model, const TvOptions& opts) {
  cfg.validate();
  require_increasing(opts.checkpoints);
  require(opts.replicas >= 200, ErrorCode::argument, "tv_decay needs at least 200 replicas");
  require(opts.bins >= 2, ErrorCode::argument, "tv_decay needs at least 2 bins");
  require(opts.reference_size >= 1000, ErrorCode::argument, "reference sample too small");
  const Index n = model.dim();
  const Vec theta = unit_direction(opts.direction, n);
  const double delta = cfg.delta_for(static_cast<int>(n));

  Rng ref_rng = make_stream(cfg.seed, streams::base_sample);
  const Vec ref = sample_base(model, opts.reference_size, ref_rng).points() * theta;
  const double lo = ref.minCoeff(), hi = ref.maxCoeff();
  const double width = (hi - lo) / opts.bins;
  auto bin_of = [&](double v) {
    if (!(width > 0.0)) return 0;
    const int b = static_cast<int>(std::floor((v - lo) / width));
    return std::clamp(b, 0, opts.bins - 1);
  };
  std::vector<double> ref_hist(static_cast<std::size_t>(opts.bins), 0.0);
  for (Index i = 0; i < ref.size(); ++i) ref_hist[bin_of(ref(i))] += 1.0 / static_cast<double>(ref.size());

  const std::size_t nc = opts.checkpoints.size();
  std::vector<std::vector<double>> hist(nc, std::vector<double>(static_cast<std::size_t>(opts.bins), 0.0));
  Rng rng = make_stream(cfg.seed, streams::chain);
  const double inc = 1.0 / opts.replicas;
  for (int r = 0; r < opts.replicas; ++r) {
    Vec x = start_point(cfg, model, rng);
    walk_to_checkpoints(x, delta, model, opts.checkpoints, rng,
                        [&](std::size_t c, const Vec& state) { hist[c][bin_of(theta.dot(state))] += inc; });
  }

  // E|p̂ − q̂| ≈ √(2/π)·√(p(1−p)(1/R + 1/M)) per bin.
  double floor = 0.0;
  for (double p : ref_hist) {
    floor += std::sqrt(2.0 / M_PI * p * (1.0 - p) * (1.0 / opts.replicas + 1.0 / opts.reference_size));
  }
  floor *= 0.5;

  std::vector<TvRow> rows;
  for (std::size_t c = 0; c < nc; ++c) {
    double tv = 0.0;
    for (int b = 0; b < opts.bins; ++b) tv += std::abs(hist[c][b] - ref_hist[b]);
    rows.push_back({opts.checkpoints[c], 0.5 * tv, floor});
  }
  return rows;
}

MonotoneVerdict monotone_up_to_noise(const std::vector<TvRow>& rows, double slack) {
  MonotoneVerdict v;
  v.slack = slack;
  if (rows.size() < 2) {
    v.passes = !rows.empty();
    return v;
  }
  v.worst_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rows.size(); ++i) v.worst_increase = std::max(v.worst_increase, rows[i].tv - rows[i - 1].tv);
  v.passes = v.worst_increase <= slack && rows.back().tv < rows.front().tv;
  return v;
}

Stationarity stationarity_check(const ChainConfig& cfg, const BaseDensity& model, const std::vector<long>& checkpoints,
                                int replicas, const Vec& direction, double z_limit) {
  cfg.validate();
  require_increasing(checkpoints);
  require(replicas >= 2, ErrorCode::argument, "stationarity needs at least 2 replicas");
  const Index n = model.dim();
  const Vec theta = unit_direction(direction, n);
  const double delta = cfg.delta_for(static_cast<int>(n));

  Stationarity out;
  const auto mean = model.analytic_mean();
  const auto cov = model.analytic_cov();
  if (mean && cov) {
    out.ref_proj = theta.dot(*mean);
    out.ref_sq_norm = cov->trace() + mean->squaredNorm();
  } else {
    Rng ref_rng = make_stream(cfg.seed, streams::base_sample);
    const Ensemble ref = sample_base(model, 200000, ref_rng);
    out.ref_proj = (ref.points() * theta).mean();
    out.ref_sq_norm = ref.points().rowwise().squaredNorm().mean();
  }

  const std::size_t nc = checkpoints.size();
  std::vector<std::vector<double>> proj(nc), sq(nc);
  Rng rng = make_stream(cfg.seed, streams::chain);
  for (int r = 0; r < replicas; ++r) {
    Vec x = exact_draw(model, rng);
    walk_to_checkpoints(x, delta, model, checkpoints, rng, [&](std::size_t c, const Vec& state) {
      proj[c].push_back(theta.dot(state));
      sq[c].push_back(state.squaredNorm());
    });
  }
  auto mean_se = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / (v.size() - 1) / v.size())};
  };
  for (std::size_t c = 0; c < nc; ++c) {
    StationarityRow row;
    row.checkpoint = checkpoints[c];
    std::tie(row.mean_proj, row.se_proj) = mean_se(proj[c]);
    std::tie(row.mean_sq_norm, row.se_sq_norm) = mean_se(sq[c]);
    out.max_z = std::max(out.max_z, std::abs(row.mean_proj - out.ref_proj) / row.se_proj);
    out.max_z = std::max(out.max_z, std::abs(row.mean_sq_norm - out.ref_sq_norm) / row.se_sq_norm);
    if (c > 0) {
      for (const auto* series : {&proj, &sq}) {
        std::vector<double> d((*series)[c].size());
        for (std::size_t r = 0; r < d.size(); ++r) d[r] = (*series)[c][r] - (*series)[0][r];
        const auto [m, se] = mean_se(d);
        if (se > 0.0) out.max_drift_z = std::max(out.max_drift_z, std::abs(m) / se);
      }
    }
    out.rows.push_back(row);
  }
  out.passes = out.max_drift_z <= z_limit;
  return out;
}

DetailedBalance detailed_balance_check(const BaseDensity& model, double delta, const Vec& direction, double a_lo,
                                       double a_hi, double b_lo, double b_hi, Index transitions, std::uint64_t seed,
                                       double z_limit) {
  require(delta > 0.0, ErrorCode::argument, "delta must be positive");
  require(a_lo < a_hi && b_lo < b_hi && (a_hi <= b_lo || b_hi <= a_lo), ErrorCode::argument,
          "cells must be non-empty and disjoint");
  require(transitions >= 2, ErrorCode::argument, "need at least 2 transitions");
  const Vec theta = unit_direction(direction, model.dim());
  Rng rng = make_stream(seed, streams::chain);
  const Ensemble starts = sample_base(model, transitions, rng);
  auto cell = [&](const Vec& x) {
    const double p = theta.dot(x);
    if (p >= a_lo && p < a_hi) return 0;
    if (p >= b_lo && p < b_hi) return 1;
    return -1;
  };
  Index ab = 0, ba = 0;
  for (Index i = 0; i < transitions; ++i) {
    const Vec x = starts.point(i).transpose();
    const Vec y = ball_walk_step(x, delta, model, rng).x;
    const int cx = cell(x), cy = cell(y);
    if (cx == 0 && cy == 1) ++ab;
    if (cx == 1 && cy == 0) ++ba;
  }
  DetailedBalance out;
  const double m = static_cast<double>(transitions);
  out.flow_ab = ab / m;
  out.flow_ba = ba / m;
  const double diff = out.flow_ab - out.flow_ba;
  out.se = std::sqrt(std::max(out.flow_ab + out.flow_ba - diff * diff, 0.0) / m);
  out.z = out.se > 0.0 ? std::abs(diff) / out.se : 0.0;
  out.passes = out.z <= z_limit && (ab + ba) > 0;
  return out;
}

void write_chain_csv(std::ostream& out, const ChainResult& chain) {
  out << "step,accepted";
  for (Index i = 0; i < chain.states.cols(); ++i) out << ",x" << (i + 1);
  out << '\n';
  const auto old = out.precision(17);
  for (Index r = 0; r < chain.states.rows(); ++r) {
    out << chain.burn_in + (r + 1) * chain.thin << ',' << static_cast<int>(chain.accepted[r]);
    for (Index i = 0; i < chain.states.cols(); ++i) out << ',' << chain.states(r, i);
    out << '\n';
  }
  out.precision(old);
}

nlohmann::json tv_to_json(const std::vector<TvRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) j.push_back({{"checkpoint", r.checkpoint}, {"tv", r.tv}, {"noise_floor", r.noise_floor}});
  return j;
}

}  // namespace sloc
