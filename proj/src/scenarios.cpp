#include "bcbf/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "bcbf/barriers.hpp"
#include "bcbf/errors.hpp"
#include "bcbf/rng.hpp"

namespace bcbf {

std::string_view to_string(ScenarioKind k) {
  return k == ScenarioKind::kTracking ? "tracking" : "collision";
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kSuccess:
      return "success";
    case RunStatus::kCollision:
      return "collision";
    case RunStatus::kTimeout:
      return "timeout";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  model.validate();
  mixture.validate();
  filter.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("scenario dt must be > 0");
  if (!(max_time > 0.0)) throw std::invalid_argument("scenario max_time must be > 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("scenario horizon must be > 0");
  if (!(success_tolerance > 0.0)) throw std::invalid_argument("success tolerance must be > 0");
  if (!(true_velocity_scale >= 0.0)) throw std::invalid_argument("true velocity scale must be >= 0");
  if (!target.allFinite() || !estimated_velocity.allFinite()) throw std::invalid_argument("non-finite target/velocity");
  if (randomization.start_half_width < 0.0 || randomization.mean_jitter < 0.0 ||
      randomization.heading_half_width < 0.0) {
    throw std::invalid_argument("randomisation widths must be >= 0");
  }
  const std::size_t required = min_samples(filter.risk);
  if (n_samples < required) throw InsufficientSamples(required, n_samples);
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows, bool include_timing) {
  os << "t,p_x,p_y,theta,u_v,u_omega,h_tilde_min,empirical_var_min,qp_time_us,flags\n";
  for (const auto& r : rows) {
    os << r.t << ',' << r.px << ',' << r.py << ',' << r.theta << ',' << r.u_v << ',' << r.u_omega << ','
       << r.h_tilde_min << ',' << r.empirical_var_min << ',' << (include_timing ? r.qp_time_us : 0.0) << ','
       << r.flags << '\n';
  }
}

std::size_t step_count(double t_max, double dt) {
  return static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
}

namespace {

using Clock = std::chrono::steady_clock;

struct TimedFilter {
  FilterOutput out;
  double micros = 0.0;
  bool degenerate = false;
};

TimedFilter timed_step(const SafetyFilter& filter, const ScenarioConfig& cfg, const RobotState& x,
                       const BeliefState& belief) {
  TimedFilter r;
  const auto t0 = Clock::now();
  try {
    r.out = filter.step(x, belief, cfg.estimated_velocity, cfg.target);
  } catch (const DegenerateGeometry&) {
    // A belief sample sits exactly on the robot's offset point: stop for one step.
    r.degenerate = true;
    r.out.u = {0.0, 0.0};
    r.out.diag.flags = kFlagDegenerate;
  }
  r.micros = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
  return r;
}

Vec3 robot_noise(const CounterStream& s, std::uint64_t step) {
  const auto z = s.normal3(step);
  return {z[0], z[1], z[2]};
}

Vec2 object_noise(const CounterStream& s, std::uint64_t step) {
  const auto z = s.normal_pair(step);
  return {z[0], z[1]};
}

bool truth_collides(const RobotState& x, const ObjectState& o, const ModelParams& params) {
  try {
    return collision_barrier_value(x, o, params) < 0.0;
  } catch (const DegenerateGeometry&) {
    return true;
  }
}

}  // namespace

RunResult run_collision(const ScenarioConfig& cfg, std::uint64_t seed, bool record_trace) {
  cfg.validate();
  if (cfg.kind != ScenarioKind::kCollision) throw std::invalid_argument("run_collision needs a collision config");

  const SafetyFilter filter(BarrierKind::kCollision, cfg.model, cfg.filter, cfg.gains, cfg.n_samples);
  const CounterStream robot_stream(derive_key(seed, StreamTag::kRobot));
  const CounterStream truth_stream(derive_key(seed, StreamTag::kTruthNoise));
  const Vec2 v_true = cfg.true_velocity();

  RobotState x = cfg.start;
  ObjectState truth = draw_ground_truth(cfg.mixture, seed);
  BeliefState belief = sample_initial_belief(cfg.mixture, cfg.n_samples, seed);

  RunResult result;
  RunOutcome& oc = result.outcome;
  const std::size_t steps = step_count(cfg.max_time, cfg.dt);
  if (record_trace) result.trace.reserve(steps);
  double total_us = 0.0;

  auto classify = [&](double t) {
    if (truth_collides(x, truth, cfg.model)) {
      oc.status = RunStatus::kCollision;
      oc.t_end = t;
      return true;
    }
    if (std::hypot(x.px - cfg.target.x(), x.py - cfg.target.y()) <= cfg.success_tolerance) {
      oc.status = RunStatus::kSuccess;
      oc.t_end = t;
      return true;
    }
    return false;
  };

  bool done = false;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    if (classify(t)) {
      done = true;
      break;
    }
    ControlInput u;
    TraceRow row;
    if (cfg.filter_enabled) {
      const TimedFilter tf = timed_step(filter, cfg, x, belief);
      u = tf.out.u;
      total_us += tf.micros;
      row.h_tilde_min = tf.out.diag.h_tilde_min;
      row.empirical_var_min = tf.out.diag.empirical_var_min;
      row.qp_time_us = tf.micros;
      row.flags = tf.out.diag.flags;
    } else {
      u = reference_controller(x, cfg.target, cfg.gains, cfg.filter.u_lo, cfg.filter.u_hi);
    }
    ++oc.steps;
    if (row.flags != kFlagNone) ++oc.violations;
    if (row.flags & kFlagInfeasible) ++oc.infeasible_steps;
    if (row.flags & kFlagNonpositive) ++oc.nonpositive_steps;
    if (record_trace) {
      row.t = t;
      row.px = x.px;
      row.py = x.py;
      row.theta = x.theta;
      row.u_v = u.v;
      row.u_omega = u.omega;
      result.trace.push_back(row);
    }

    truth = step_object(truth, v_true, cfg.model.d_diag, cfg.dt, object_noise(truth_stream, k));
    propagate_belief_inplace(belief, cfg.estimated_velocity, cfg.model.d_diag, cfg.dt, seed, k);
    x = step_robot(x, u, cfg.model.sigma_diag, cfg.dt, robot_noise(robot_stream, k));
  }
  if (!done && !classify(static_cast<double>(steps) * cfg.dt)) {
    oc.status = RunStatus::kTimeout;
    oc.t_end = static_cast<double>(steps) * cfg.dt;
  }
  oc.t_avg_filter_ms = oc.steps > 0 ? total_us / static_cast<double>(oc.steps) / 1000.0 : 0.0;
  return result;
}

TrackingResult run_tracking(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.kind != ScenarioKind::kTracking) throw std::invalid_argument("run_tracking needs a tracking config");

  const SafetyFilter filter(BarrierKind::kFov, cfg.model, cfg.filter, cfg.gains, cfg.n_samples);
  const CounterStream robot_stream(derive_key(seed, StreamTag::kRobot));

  RobotState x = cfg.start;
  BeliefState belief = sample_initial_belief(cfg.mixture, cfg.n_samples, seed);

  TrackingResult res;
  const std::size_t steps = step_count(cfg.horizon, cfg.dt);
  res.trace.reserve(steps);
  double total_us = 0.0;
  double sum_v = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const TimedFilter tf = timed_step(filter, cfg, x, belief);
    const ControlInput u = tf.out.u;
    total_us += tf.micros;
    sum_v += u.v;

    TraceRow row{static_cast<double>(k) * cfg.dt, x.px, x.py, x.theta, u.v, u.omega, tf.out.diag.h_tilde_min,
                 tf.out.diag.empirical_var_min, tf.micros, tf.out.diag.flags};
    if (row.h_tilde_min < 0.0) ++res.violation_steps;
    if (row.h_tilde_min > row.empirical_var_min) ++res.bound_above_empirical;
    if (row.flags & kFlagInfeasible) ++res.infeasible_steps;
    res.trace.push_back(row);

    propagate_belief_inplace(belief, cfg.estimated_velocity, cfg.model.d_diag, cfg.dt, seed, k);
    x = step_robot(x, u, cfg.model.sigma_diag, cfg.dt, robot_noise(robot_stream, k));
  }
  res.steps = steps;
  res.mean_u_v = steps > 0 ? sum_v / static_cast<double>(steps) : 0.0;
  res.t_avg_filter_ms = steps > 0 ? total_us / static_cast<double>(steps) / 1000.0 : 0.0;
  return res;
}

ScenarioConfig randomize(const ScenarioConfig& cfg, std::uint64_t run_seed) {
  ScenarioConfig out = cfg;
  const CounterStream s(derive_key(run_seed, StreamTag::kRandomization));
  auto sym = [&](std::uint64_t counter, double half) { return half * (2.0 * s.uniform(counter) - 1.0); };
  const Randomization& r = cfg.randomization;
  out.start.px += sym(0, r.start_half_width);
  out.start.py += sym(1, r.start_half_width);
  out.start.theta = wrap_angle(out.start.theta + sym(2, r.heading_half_width));
  for (std::size_t j = 0; j < out.mixture.means.size(); ++j) {
    out.mixture.means[j].x() += sym(3 + 2 * j, r.mean_jitter);
    out.mixture.means[j].y() += sym(4 + 2 * j, r.mean_jitter);
  }
  return out;
}

std::vector<RiskSpec> benchmark_methods() {
  // The essential lower bound is filled in per barrier by the filter.
  return {RiskSpec::var(0.1, 0.05), RiskSpec::cvar(0.1, 0.05, 0.0), RiskSpec::expectation(0.05, 0.0)};
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(w);
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

BenchmarkSummary benchmark(const ScenarioConfig& cfg, std::size_t n_runs, const std::vector<RiskSpec>& methods,
                           std::uint64_t seed, unsigned workers) {
  if (n_runs == 0) throw std::invalid_argument("benchmark needs n_runs >= 1");
  if (methods.empty()) throw std::invalid_argument("benchmark needs at least one method");
  if (cfg.kind != ScenarioKind::kCollision) throw std::invalid_argument("benchmark runs the collision scenario");

  std::vector<ScenarioConfig> per_method;
  for (const auto& m : methods) {
    ScenarioConfig c = cfg;
    c.filter.risk = m;
    c.validate();
    per_method.push_back(std::move(c));
  }

  BenchmarkSummary summary;
  summary.n_runs = n_runs;
  summary.n_samples = cfg.n_samples;
  summary.true_velocity_scale = cfg.true_velocity_scale;
  summary.outcomes.assign(n_runs, std::vector<RunOutcome>(methods.size()));

  parallel_for(n_runs, workers, [&](std::size_t run) {
    const std::uint64_t run_seed = derive_key(seed, 0, run);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const ScenarioConfig rc = randomize(per_method[m], run_seed);
      summary.outcomes[run][m] = run_collision(rc, run_seed).outcome;
    }
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodSummary ms;
    ms.label = methods[m].label();
    ms.risk = methods[m];
    double weighted_ms = 0.0;
    std::size_t steps = 0;
    for (std::size_t run = 0; run < n_runs; ++run) {
      const RunOutcome& o = summary.outcomes[run][m];
      switch (o.status) {
        case RunStatus::kSuccess:
          ++ms.success;
          break;
        case RunStatus::kCollision:
          ++ms.collision;
          break;
        case RunStatus::kTimeout:
          ++ms.timeout;
          break;
      }
      weighted_ms += o.t_avg_filter_ms * static_cast<double>(o.steps);
      steps += o.steps;
    }
    ms.t_avg_ms = steps > 0 ? weighted_ms / static_cast<double>(steps) : 0.0;
    summary.methods.push_back(std::move(ms));
  }
  return summary;
}

BenchmarkSummary shift_experiment(const ScenarioConfig& cfg, std::size_t n_runs, std::uint64_t seed,
                                  unsigned workers, double ell, double velocity_scale) {
  ScenarioConfig c = cfg;
  c.true_velocity_scale = velocity_scale;
  const RiskSpec nominal = RiskSpec::var(0.1, 0.05);
  return benchmark(c, n_runs, {nominal, nominal.with_ell(ell)}, seed, workers);
}

}  // namespace bcbf
