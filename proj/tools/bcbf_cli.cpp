// bcbf: command-line front end for the risk bounds, the closed-loop
// scenarios and the Monte Carlo benchmarks.
//
// Exit codes: 0 success, 1 usage/parse/config error, 2 insufficient samples.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "bcbf/config.hpp"
#include "bcbf/errors.hpp"
#include "bcbf/rng.hpp"
#include "bcbf/risk_bounds.hpp"
#include "bcbf/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInsufficient = 2;

std::vector<double> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample file " + path);
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::istringstream ls(line);
    double v = 0.0;
    std::string rest;
    if (!(ls >> v) || (ls >> rest) || !std::isfinite(v)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected one finite number");
    }
    out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct CommonRunFlags {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned workers = 0;
  std::string out_dir;
  std::string trace;
  bool no_timing = false;
};

void add_run_flags(CLI::App* cmd, CommonRunFlags& f) {
  cmd->add_option("--config", f.config, "JSON configuration file")->required();
  cmd->add_option("--seed", f.seed, "top-level seed (overrides config)")->each([&](const std::string&) {
    f.seed_set = true;
  });
  cmd->add_option("--workers", f.workers, "worker threads (overrides config)");
  cmd->add_option("--out-dir", f.out_dir, "output directory (overrides config)");
  cmd->add_option("--trace", f.trace, "trace verbosity: none, summary, full")
      ->check(CLI::IsMember({"none", "summary", "full"}));
  cmd->add_flag("--no-timing", f.no_timing, "write 0 for wall-clock fields (byte-reproducible outputs)");
}

bcbf::Config resolve(const CommonRunFlags& f) {
  bcbf::Config cfg = bcbf::load_config(f.config);
  if (f.seed_set) cfg.run.seed = f.seed;
  if (f.workers > 0) cfg.run.workers = f.workers;
  if (!f.out_dir.empty()) cfg.run.out_dir = f.out_dir;
  if (!f.trace.empty()) cfg.run.trace = bcbf::parse_trace_level(f.trace);
  fs::create_directories(cfg.run.out_dir);
  return cfg;
}

int cmd_simulate(const CommonRunFlags& f) {
  const bcbf::Config cfg = resolve(f);
  const fs::path out = cfg.run.out_dir;
  const bool timing = !f.no_timing;
  json summary = {{"config", bcbf::to_json(cfg.scenario)}, {"seed", cfg.run.seed}};
  std::vector<bcbf::TraceRow> trace;
  if (cfg.scenario.kind == bcbf::ScenarioKind::kCollision) {
    auto res = bcbf::run_collision(cfg.scenario, cfg.run.seed, cfg.run.trace == bcbf::TraceLevel::kFull);
    summary["outcome"] = bcbf::to_json(res.outcome, timing);
    trace = std::move(res.trace);
  } else {
    auto res = bcbf::run_tracking(cfg.scenario, cfg.run.seed);
    summary["tracking"] = {{"steps", res.steps},
                           {"violation_steps", res.violation_steps},
                           {"bound_above_empirical_steps", res.bound_above_empirical},
                           {"infeasible_steps", res.infeasible_steps},
                           {"mean_u_v", res.mean_u_v},
                           {"t_avg_filter_ms", timing ? res.t_avg_filter_ms : 0.0}};
    if (cfg.run.trace == bcbf::TraceLevel::kFull) trace = std::move(res.trace);
  }
  if (cfg.run.trace != bcbf::TraceLevel::kNone) write_text(out / "summary.json", summary.dump(2) + "\n");
  if (cfg.run.trace == bcbf::TraceLevel::kFull) {
    std::ofstream os(out / "trace.csv");
    bcbf::write_trace_csv(os, trace, timing);
  }
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int emit_benchmark(const bcbf::Config& cfg, const bcbf::BenchmarkSummary& s, bool timing, const std::string& stem) {
  const fs::path out = cfg.run.out_dir;
  json j = bcbf::to_json(s, timing);
  j["seed"] = cfg.run.seed;
  j["config"] = bcbf::to_json(cfg.scenario);
  if (cfg.run.trace == bcbf::TraceLevel::kFull) {
    json runs = json::array();
    for (const auto& row : s.outcomes) {
      json r = json::array();
      for (const auto& o : row) r.push_back(bcbf::to_json(o, timing));
      runs.push_back(r);
    }
    j["runs"] = runs;
  }
  if (cfg.run.trace != bcbf::TraceLevel::kNone) {
    write_text(out / (stem + ".json"), j.dump(2) + "\n");
    write_text(out / (stem + ".csv"), bcbf::summary_csv(s, timing));
  }
  std::cout << bcbf::summary_csv(s, timing);
  return kExitOk;
}

int cmd_benchmark(const CommonRunFlags& f) {
  const bcbf::Config cfg = resolve(f);
  const auto s = bcbf::benchmark(cfg.scenario, cfg.run.n_runs, cfg.run.methods, cfg.run.seed, cfg.run.workers);
  return emit_benchmark(cfg, s, !f.no_timing, "benchmark");
}

int cmd_shift(const CommonRunFlags& f) {
  const bcbf::Config cfg = resolve(f);
  const auto s = bcbf::shift_experiment(cfg.scenario, cfg.run.n_runs, cfg.run.seed, cfg.run.workers,
                                        cfg.run.shift_ell, cfg.run.shift_velocity_scale);
  return emit_benchmark(cfg, s, !f.no_timing, "shift");
}

struct BoundFlags {
  std::string file;
  std::string measure = "var";
  double tau = 0.1;
  double delta = 0.05;
  double ell = 0.0;
  double lb = 0.0;
  bool lb_set = false;
  std::string slack = "conservative";
  bool weights = false;
};

bcbf::RiskSpec spec_from(const std::string& measure, double tau, double delta, double ell, double lb,
                         const std::string& slack) {
  bcbf::RiskSpec spec;
  spec.measure = bcbf::parse_risk_measure(measure);
  spec.tau = spec.measure == bcbf::RiskMeasure::kExpectation ? 1.0 : tau;
  spec.delta = delta;
  spec.ell = ell;
  spec.essential_lb = lb;
  spec.robust_slack_sign = slack == "as_printed" ? bcbf::SlackSign::kAsPrinted : bcbf::SlackSign::kConservative;
  spec.validate();
  return spec;
}

int cmd_bounds(const BoundFlags& f) {
  const std::vector<double> samples = read_samples(f.file);
  bcbf::RiskSpec spec = spec_from(f.measure, f.tau, f.delta, f.ell, f.lb, f.slack);
  if (!f.lb_set && spec.measure != bcbf::RiskMeasure::kVaR && !samples.empty()) {
    spec.essential_lb = *std::min_element(samples.begin(), samples.end());
  }
  const bcbf::BoundResult r = bcbf::lower_bound(samples, spec);
  std::cout << bcbf::to_json(r, f.weights).dump() << "\n";
  return kExitOk;
}

struct ValidateFlags {
  std::string measure = "var";
  double tau = 0.1;
  double delta = 0.05;
  std::size_t n = 200;
  std::size_t trials = 5000;
  std::uint64_t seed = 1;
  double mean = 0.5;
  double stddev = 0.2;
};

int cmd_validate(const ValidateFlags& f) {
  if (f.trials == 0) throw std::invalid_argument("validate requires trials >= 1");
  // Gaussians have no finite essential lower bound; mean - 8 sigma is exceeded with probability ~6e-16.
  const double lb = f.mean - 8.0 * f.stddev;
  const bcbf::RiskSpec spec = spec_from(f.measure, f.tau, f.delta, 0.0, lb, "conservative");
  const boost::math::normal_distribution<double> dist(f.mean, f.stddev);
  double truth = 0.0;
  if (spec.measure == bcbf::RiskMeasure::kVaR) {
    truth = boost::math::quantile(dist, spec.tau);
  } else if (spec.measure == bcbf::RiskMeasure::kCVaR) {
    const boost::math::normal_distribution<double> std_normal;
    const double z = boost::math::quantile(std_normal, spec.tau);
    truth = f.mean - f.stddev * boost::math::pdf(std_normal, z) / spec.tau;
  } else {
    truth = f.mean;
  }
  const bcbf::BoundEvaluator eval(spec, f.n);
  const bcbf::CounterStream stream(bcbf::derive_key(f.seed, bcbf::StreamTag::kValidation));
  std::vector<double> samples(f.n);
  std::size_t violations = 0;
  for (std::size_t t = 0; t < f.trials; ++t) {
    for (std::size_t i = 0; i < f.n; i += 2) {
      const auto z = stream.normal_pair(t * f.n + i);
      samples[i] = f.mean + f.stddev * z[0];
      if (i + 1 < f.n) samples[i + 1] = f.mean + f.stddev * z[1];
    }
    if (eval(samples).value > truth) ++violations;
  }
  const double m = static_cast<double>(f.trials);
  const double rate = static_cast<double>(violations) / m;
  const double threshold = f.delta + 3.0 * std::sqrt(f.delta * (1.0 - f.delta) / m);
  const json j = {{"measure", std::string(bcbf::to_string(spec.measure))},
                  {"tau", spec.tau},
                  {"delta", spec.delta},
                  {"n", f.n},
                  {"trials", f.trials},
                  {"true_value", truth},
                  {"violations", violations},
                  {"violation_rate", rate},
                  {"threshold", threshold},
                  {"pass", rate <= threshold}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Belief control barrier functions with sample-based risk bounds"};
  app.require_subcommand(1);

  BoundFlags bf;
  auto* bounds = app.add_subcommand("bounds", "lower bound of a risk measure from a sample file");
  bounds->add_option("samples", bf.file, "newline-delimited samples")->required();
  bounds->add_option("--measure", bf.measure, "var, cvar or expectation")
      ->check(CLI::IsMember({"var", "cvar", "expectation"}));
  bounds->add_option("--tau", bf.tau, "risk level");
  bounds->add_option("--delta", bf.delta, "confidence parameter");
  bounds->add_option("--ell", bf.ell, "distribution-shift budget");
  bounds->add_option("--lb", bf.lb, "essential lower bound (default: sample minimum)")->each([&](const std::string&) {
    bf.lb_set = true;
  });
  bounds->add_option("--robust-slack-sign", bf.slack, "conservative or as_printed")
      ->check(CLI::IsMember({"conservative", "as_printed"}));
  bounds->add_flag("--weights", bf.weights, "include per-sample weights");

  ValidateFlags vf;
  auto* validate = app.add_subcommand("validate", "Monte Carlo check of the bound's confidence guarantee");
  validate->add_option("--measure", vf.measure, "var, cvar or expectation")
      ->check(CLI::IsMember({"var", "cvar", "expectation"}));
  validate->add_option("--tau", vf.tau, "risk level");
  validate->add_option("--delta", vf.delta, "confidence parameter");
  validate->add_option("--n", vf.n, "samples per trial");
  validate->add_option("--trials", vf.trials, "number of trials");
  validate->add_option("--seed", vf.seed, "seed");

  CommonRunFlags sim_flags;
  CommonRunFlags bench_flags;
  CommonRunFlags shift_flags;
  auto* simulate = app.add_subcommand("simulate", "one closed-loop run");
  add_run_flags(simulate, sim_flags);
  auto* bench = app.add_subcommand("benchmark", "paired Monte Carlo comparison of risk measures");
  add_run_flags(bench, bench_flags);
  auto* shift = app.add_subcommand("shift", "nominal vs robust bound under a velocity shift");
  add_run_flags(shift, shift_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (bounds->parsed()) return cmd_bounds(bf);
    if (validate->parsed()) return cmd_validate(vf);
    if (simulate->parsed()) return cmd_simulate(sim_flags);
    if (bench->parsed()) return cmd_benchmark(bench_flags);
    if (shift->parsed()) return cmd_shift(shift_flags);
  } catch (const bcbf::InsufficientSamples& e) {
    std::cerr << "error: insufficient samples: " << e.what() << "\n";
    return kExitInsufficient;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
