#include "sloc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace sloc {

namespace fs = std::filesystem;
using nlohmann::json;

WilsonInterval wilson_interval(long successes, long trials, double z) {
  require(trials >= 1 && successes >= 0 && successes <= trials, ErrorCode::argument,
          "wilson_interval needs 0 ≤ successes ≤ trials and trials ≥ 1");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  require(in.good(), ErrorCode::io, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::io, p.string() + " is not valid JSON: " + e.what());
  }
}

struct Stat {
  std::vector<double> values;

  json to_json() const {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double se =
        values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size())) : 0.0;
    return {{"mean", mean}, {"se", se}, {"count", values.size()}};
  }
};

struct Frequency {
  long hits = 0;
  long trials = 0;

  void add(bool hit) {
    hits += hit ? 1 : 0;
    ++trials;
  }
  json to_json() const {
    const WilsonInterval w = wilson_interval(hits, trials);
    return {{"count", hits}, {"trials", trials}, {"estimate", w.estimate}, {"lower", w.lower}, {"upper", w.upper}};
  }
};

}  // namespace

json summarize(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::not_found, "artifact directory " + dir.string() + " does not exist");
  std::vector<fs::path> manifests, summaries;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "manifest.json") manifests.push_back(entry.path());
    if (entry.path().filename() == "summary.json") summaries.push_back(entry.path());
  }
  if (manifests.empty() && summaries.empty()) {
    fail(ErrorCode::not_found, "no run manifests under " + dir.string());
  }
  std::sort(manifests.begin(), manifests.end());
  std::sort(summaries.begin(), summaries.end());

  Stat max_phi2;
  Frequency phi2_event, frozen, faults;
  std::map<std::string, Stat> g_T, g_shift;
  std::map<std::string, Frequency> volume;
  for (const auto& p : manifests) {
    const json m = read_json(p);
    if (m.value("kind", std::string()) != "localize") continue;
    const double n = m.at("n").get<double>();
    max_phi2.values.push_back(m.at("max_phi2").get<double>());
    phi2_event.add(m.at("max_phi2").get<double>() >= 8.0 * n);
    if (m.value("adaptive", false)) frozen.add(m.value("frozen", false));
    faults.add(!m.value("fault", json(nullptr)).is_null());
    const auto names = m.value("set_names", std::vector<std::string>{});
    const auto g0 = m.value("g0", std::vector<double>{});
    const auto gT = m.value("gT", std::vector<double>{});
    for (std::size_t k = 0; k < names.size() && k < gT.size() && k < g0.size(); ++k) {
      g_T[names[k]].values.push_back(gT[k]);
      g_shift[names[k]].values.push_back(gT[k] - g0[k]);
      volume[names[k]].add(gT[k] >= 0.25 && gT[k] <= 0.75);
    }
  }

  json out{{"directory", dir.string()}, {"runs", max_phi2.values.size()}};
  if (!max_phi2.values.empty()) {
    json sets = json::object();
    for (const auto& [name, s] : g_T) {
      sets[name] = {{"g_T", s.to_json()}, {"g_T_minus_g_0", g_shift[name].to_json()}, {"volume_event", volume[name].to_json()}};
    }
    out["localize"] = {{"max_phi2", max_phi2.to_json()},
                       {"max_phi2_ge_8n", phi2_event.to_json()},
                       {"faults", faults.to_json()},
                       {"sets", sets}};
    if (frozen.trials > 0) out["localize"]["frozen"] = frozen.to_json();
  }
  json experiments = json::array();
  for (const auto& p : summaries) {
    const json s = read_json(p);
    json failed = json::array();
    for (const auto& c : s.value("checks", json::array())) {
      if (c.value("verdict", std::string()) == "assert-fail") failed.push_back(c.at("name"));
    }
    experiments.push_back({{"path", fs::relative(p, dir).string()},
                           {"kind", s.value("kind", std::string())},
                           {"exit_code", s.value("exit_code", 0)},
                           {"checks", s.value("checks", json::array()).size()},
                           {"failed", failed}});
  }
  out["experiments"] = experiments;
  return out;
}

}  // namespace sloc
