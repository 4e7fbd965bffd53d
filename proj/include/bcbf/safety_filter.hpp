#pragma once

// Belief-barrier safety filter: evaluates the per-sample barriers, bounds
// them with the configured risk measure, turns each composed barrier into a
// linear constraint on u and solves the resulting QP.

#include <cstddef>
#include <vector>

#include "bcbf/barriers.hpp"
#include "bcbf/belief.hpp"
#include "bcbf/linalg.hpp"
#include "bcbf/qp.hpp"
#include "bcbf/risk_bounds.hpp"
#include "bcbf/sde_models.hpp"

namespace bcbf {

struct FilterConfig {
  double gamma = 1.0;
  Mat2 Q = Mat2::Identity();
  Vec2 u_lo{-2.0, -2.0};
  Vec2 u_hi{2.0, 2.0};
  double h_min = 1e-6;
  RiskSpec risk = RiskSpec::var(0.1, 0.05);
  /// Level of the empirical VaR reported in diagnostics.
  double diagnostic_tau = 0.1;

  void validate() const;
};

struct ReferenceGains {
  double k_rho = 1.0;
  double k_alpha = 2.0;
};

enum class BarrierKind { kFov, kCollision };

/// What to do with the 1/h correction terms when the composed barrier is <= 0.
enum class NonpositivePolicy { kThrow, kDropCorrection };

/// Builds lin_u . u >= rhs from a composed barrier. Diffusions are diagonal,
/// so every trace and norm reduces to a weighted sum over the diagonal.
CbfConstraint assemble_constraint(const BcbfEval& bcbf, const RobotState& x, const ModelParams& params,
                                  const Vec2& v_est, const FilterConfig& cfg,
                                  NonpositivePolicy policy = NonpositivePolicy::kThrow);

/// Polar proportional law towards target, saturated to [lo, hi].
ControlInput reference_controller(const RobotState& x, const Vec2& target, const ReferenceGains& gains,
                                  const Vec2& lo, const Vec2& hi);

enum StepFlag : unsigned {
  kFlagNone = 0,
  kFlagInfeasible = 1u << 0,
  kFlagNonpositive = 1u << 1,
  kFlagDegenerate = 1u << 2,
};

struct FilterDiagnostics {
  std::vector<double> h_tilde;       // one per constraint
  std::vector<double> empirical_var;  // one per constraint, at cfg.diagnostic_tau
  double h_tilde_min = 0.0;
  double empirical_var_min = 0.0;
  unsigned flags = kFlagNone;
};

struct FilterOutput {
  ControlInput u;
  ControlInput u_ref;
  std::vector<CbfConstraint> constraints;
  QpSolution qp;
  FilterDiagnostics diag;
};

class SafetyFilter {
 public:
  SafetyFilter(BarrierKind kind, const ModelParams& params, const FilterConfig& cfg, const ReferenceGains& gains,
               std::size_t n_samples);

  BarrierKind kind() const noexcept { return kind_; }
  const FilterConfig& config() const noexcept { return cfg_; }
  std::size_t sample_count() const noexcept { return n_; }

  /// Risk spec (with the barrier's essential lower bound) used for barrier i.
  const RiskSpec& barrier_spec(std::size_t i) const { return evaluators_.at(i).spec(); }
  std::size_t barrier_count() const noexcept { return evaluators_.size(); }

  /// One control update. Throws DegenerateGeometry if an active sample
  /// coincides with the robot's offset point.
  FilterOutput step(const RobotState& x, const BeliefState& belief, const Vec2& v_est, const Vec2& target) const;

  /// Composed barrier for barrier i (FoV: 0 and 1, collision: 0) without solving the QP.
  BcbfEval compose(std::size_t i, const RobotState& x, const BeliefState& belief) const;

 private:
  void fill_values(std::size_t i, const RobotState& x, const BeliefState& belief, std::vector<double>& values) const;
  BarrierEval barrier_eval(std::size_t i, const RobotState& x, const ObjectState& o) const;

  BarrierKind kind_;
  ModelParams params_;
  FilterConfig cfg_;
  ReferenceGains gains_;
  std::size_t n_;
  std::vector<BoundEvaluator> evaluators_;
};

/// Convenience wrapper constructing a SafetyFilter for a single update.
FilterOutput filter_step(BarrierKind kind, const RobotState& x, const BeliefState& belief, const ModelParams& params,
                         const FilterConfig& cfg, const ReferenceGains& gains, const Vec2& v_est, const Vec2& target);

}  // namespace bcbf
