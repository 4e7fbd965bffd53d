#pragma once

// Closed-loop experiment drivers: object tracking with two field-of-view
// barriers, dynamic collision avoidance, paired Monte Carlo benchmarking and
// the velocity-shift experiment.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bcbf/belief.hpp"
#include "bcbf/linalg.hpp"
#include "bcbf/risk_bounds.hpp"
#include "bcbf/safety_filter.hpp"
#include "bcbf/sde_models.hpp"

namespace bcbf {

enum class ScenarioKind { kTracking, kCollision };
enum class RunStatus { kSuccess, kCollision, kTimeout };

std::string_view to_string(ScenarioKind k);
std::string_view to_string(RunStatus s);

/// Per-run randomisation used by the benchmark (uniform, paired across methods).
struct Randomization {
  double start_half_width = 0.5;   // robot start position jitter [m]
  double heading_half_width = 0.0; // robot start heading jitter [rad]
  double mean_jitter = 0.3;        // mixture-mean jitter per coordinate [m]
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kCollision;
  ModelParams model;
  GaussianMixture mixture;
  std::size_t n_samples = 200;
  FilterConfig filter;
  ReferenceGains gains;
  bool filter_enabled = true;  // false applies u_ref directly
  Vec2 target{3.0, 3.0};
  RobotState start;
  Vec2 estimated_velocity{-0.75, -0.75};
  double true_velocity_scale = 1.0;
  double dt = 1e-3;
  double max_time = 10.0;  // collision runs
  double horizon = 8.0;    // tracking runs
  double success_tolerance = 0.1;
  Randomization randomization;

  void validate() const;
  Vec2 true_velocity() const { return true_velocity_scale * estimated_velocity; }
};

struct TraceRow {
  double t = 0.0;
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;
  double u_v = 0.0;
  double u_omega = 0.0;
  double h_tilde_min = 0.0;
  double empirical_var_min = 0.0;
  double qp_time_us = 0.0;
  unsigned flags = 0;
};

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows, bool include_timing = true);

struct RunOutcome {
  RunStatus status = RunStatus::kTimeout;
  double t_end = 0.0;
  double t_avg_filter_ms = 0.0;
  std::size_t steps = 0;
  std::size_t violations = 0;  // steps with any flag set
  std::size_t infeasible_steps = 0;
  std::size_t nonpositive_steps = 0;
};

struct RunResult {
  RunOutcome outcome;
  std::vector<TraceRow> trace;  // empty unless requested
};

struct TrackingResult {
  std::vector<TraceRow> trace;
  std::size_t steps = 0;
  std::size_t violation_steps = 0;       // min_i bound < 0
  std::size_t bound_above_empirical = 0; // min_i bound > min_i empirical VaR
  std::size_t infeasible_steps = 0;
  double mean_u_v = 0.0;
  double t_avg_filter_ms = 0.0;
};

/// Number of control steps covering [0, t_max).
std::size_t step_count(double t_max, double dt);

RunResult run_collision(const ScenarioConfig& cfg, std::uint64_t seed, bool record_trace = false);
TrackingResult run_tracking(const ScenarioConfig& cfg, std::uint64_t seed);

/// Randomised copy of cfg for one benchmark run; depends only on (cfg, run_seed).
ScenarioConfig randomize(const ScenarioConfig& cfg, std::uint64_t run_seed);

struct MethodSummary {
  std::string label;
  RiskSpec risk;
  std::size_t success = 0;
  std::size_t collision = 0;
  std::size_t timeout = 0;
  double t_avg_ms = 0.0;
};

struct BenchmarkSummary {
  std::size_t n_runs = 0;
  std::size_t n_samples = 0;
  double true_velocity_scale = 1.0;
  std::vector<MethodSummary> methods;
  /// outcomes[run][method]
  std::vector<std::vector<RunOutcome>> outcomes;
};

/// The three methods compared in the collision benchmark, at tau = 0.1, delta = 0.05.
std::vector<RiskSpec> benchmark_methods();

/// Paired Monte Carlo comparison: every method sees the same randomised start,
/// mixture, ground truth and noise for a given run index.
BenchmarkSummary benchmark(const ScenarioConfig& cfg, std::size_t n_runs, const std::vector<RiskSpec>& methods,
                           std::uint64_t seed, unsigned workers = 1);

/// Nominal VaR bound vs the ell-robust VaR bound with the object moving
/// velocity_scale times faster than estimated.
BenchmarkSummary shift_experiment(const ScenarioConfig& cfg, std::size_t n_runs, std::uint64_t seed,
                                  unsigned workers = 1, double ell = 0.09, double velocity_scale = 1.2);

}  // namespace bcbf
