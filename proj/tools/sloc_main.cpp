// Command-line runner: one subcommand per experiment kind plus `summarize`.
#include "sloc/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

namespace {

using nlohmann::json;

constexpr int kUnset = std::numeric_limits<int>::min();

struct Overrides {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  // Sentinels mark "not given" so that bad values still reach validation.
  long seed_count = kUnset;
  long N = kUnset;
  int n = kUnset;
  int k = kUnset;
  double T = kUnset;
  int threads = kUnset;
  std::string policy;
  std::string base;
  bool quiet = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("-o,--out", o.out, "output directory (default $SLOC_OUTPUT_DIR or ./sloc-out)");
  sub->add_option("--seeds", o.seeds, "explicit seed list")->delimiter(',');
  sub->add_option("--seed-count", o.seed_count, "use seeds 0..count-1");
  sub->add_option("-N,--particles", o.N, "ensemble size");
  sub->add_option("-n,--dim", o.n, "dimension");
  sub->add_option("-k,--steps", o.k, "number of SDE steps");
  sub->add_option("-T,--horizon", o.T, "time horizon");
  sub->add_option("-j,--threads", o.threads, "worker threads");
  sub->add_option("--policy", o.policy, "identity | adaptive");
  sub->add_option("--base", o.base, "gaussian | uniform_box | product_exponential | uniform_simplex");
  sub->add_flag("-q,--quiet", o.quiet, "only print failing checks");
}

json build_config(const std::string& kind, const Overrides& o) {
  json j = json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    j = json::parse(in, nullptr, true, true);
  }
  j["kind"] = kind;
  if (!o.out.empty()) j["output_dir"] = o.out;
  if (!o.seeds.empty()) j["seeds"] = o.seeds;
  if (o.seed_count != kUnset) j["seeds"] = {{"start", 0}, {"count", o.seed_count}};
  if (o.N != kUnset) j["N"] = o.N;
  if (o.n != kUnset) {
    j["n"] = o.n;
    if (j.contains("base") && j["base"].contains("n")) j["base"]["n"] = o.n;
  }
  if (o.k != kUnset) j["k"] = o.k;
  if (o.T != kUnset) j["T"] = o.T;
  if (o.threads != kUnset) j["threads"] = o.threads;
  if (!o.policy.empty()) j["policy"] = {{"mode", o.policy}};
  if (!o.base.empty()) j["base"] = {{"kind", o.base}};
  return j;
}

void print_result(const sloc::ExperimentResult& r, bool quiet) {
  for (const auto& c : r.checks) {
    if (quiet && !c.failed()) continue;
    const char* tag = c.verdict == sloc::Verdict::assert_pass   ? "PASS"
                      : c.verdict == sloc::Verdict::assert_fail ? "FAIL"
                                                                : "INFO";
    std::printf("%s  %-44s lhs=%-12.6g rhs=%-12.6g se=%.3g\n", tag, c.name.c_str(), c.lhs, c.rhs, c.se);
  }
  for (const auto& f : r.faults) std::printf("FAULT %s\n", f.c_str());
  std::printf("exit %d\n", r.exit_code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic localization experiments"};
  app.require_subcommand(1);
  Overrides o;
  std::string selected;
  for (const char* kind : {"localize", "inequalities", "tensor", "isoperimetry", "ballwalk", "suite"}) {
    auto* sub = app.add_subcommand(kind, std::string("run the ") + kind + " experiment");
    add_common(sub, o);
    sub->callback([&selected, kind] { selected = kind; });
  }
  std::string summarize_dir;
  auto* summ = app.add_subcommand("summarize", "aggregate the artifacts under a directory");
  summ->add_option("dir", summarize_dir, "artifact directory")->required();
  summ->callback([&selected] { selected = "summarize"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (selected == "summarize") {
      std::cout << sloc::summarize(summarize_dir).dump(2) << '\n';
      return 0;
    }
    const sloc::RunConfig cfg = sloc::RunConfig::from_json(build_config(selected, o));
    const sloc::ExperimentResult r = sloc::run_experiment(cfg);
    print_result(r, o.quiet);
    return r.exit_code;
  } catch (const sloc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sloc::exit_code_for(e);
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  }
}
