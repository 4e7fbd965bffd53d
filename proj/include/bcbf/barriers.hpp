#pragma once

// Per-sample barrier functions h(x, o) with analytic derivatives, and their
// composition into a belief barrier through a risk bound.

#include <cstddef>
#include <span>
#include <vector>

#include "bcbf/linalg.hpp"
#include "bcbf/risk_bounds.hpp"
#include "bcbf/sde_models.hpp"

namespace bcbf {

/// Value and derivatives of one barrier at one (robot, object sample) pair.
/// Mixed x/o second derivatives are not needed by the constraint and are not
/// computed.
struct BarrierEval {
  double h = 0.0;
  Vec3 grad_x = Vec3::Zero();
  Mat3 hess_x = Mat3::Zero();
  Vec2 grad_o = Vec2::Zero();
  Mat2 hess_o = Mat2::Zero();
};

/// Derivative block of the composed barrier for one belief sample, already
/// scaled by the sample's bound weight.
struct BeliefBlock {
  std::size_t index = 0;
  double weight = 0.0;
  Vec2 grad = Vec2::Zero();
  Mat2 hess = Mat2::Zero();
};

struct BcbfEval {
  double h_tilde = 0.0;
  double b_coeff = 0.0;
  Vec3 grad_x = Vec3::Zero();
  Mat3 hess_x = Mat3::Zero();
  std::vector<BeliefBlock> blocks;  // one per active sample, ascending index

  std::vector<std::size_t> active_set() const;
};

enum class FovSide { kFirst = 1, kSecond = 2 };

/// Object position in the robot frame: R(theta)^T (q - p).
Vec2 local_frame(const RobotState& x, const ObjectState& o);

/// Inverse of local_frame.
ObjectState world_frame(const RobotState& x, const Vec2& local);

/// h_i = tan(beta/2) qx_local - r_o / cos(beta/2) + (-1)^i qy_local.
double fov_barrier_value(const RobotState& x, const ObjectState& o, const ModelParams& params, FovSide side);
BarrierEval fov_barrier(const RobotState& x, const ObjectState& o, const ModelParams& params, FovSide side);

/// h = |p - q + s_e (cos theta, sin theta)| - (r_e + r_o).
/// Throws DegenerateGeometry when the offset vector has norm < 1e-9.
double collision_barrier_value(const RobotState& x, const ObjectState& o, const ModelParams& params);
BarrierEval collision_barrier(const RobotState& x, const ObjectState& o, const ModelParams& params);

/// Essential lower bounds used by CVaR/expectation bounds on each barrier.
double collision_essential_lb(const ModelParams& params);
double fov_essential_lb(const ModelParams& params);

/// Weight-linear combination of per-sample evaluations. evals[i] must belong
/// to the same sample index as bound.weights[i].
BcbfEval compose_bcbf(std::span<const BarrierEval> evals, const BoundResult& bound);

/// Same composition, but evaluates derivatives only for samples with non-zero
/// weight. eval(i) returns the BarrierEval of sample i.
template <typename EvalFn>
BcbfEval compose_bcbf_active(const BoundResult& bound, EvalFn&& eval) {
  BcbfEval out;
  out.h_tilde = bound.value;
  out.b_coeff = bound.b_coeff;
  for (std::size_t i = 0; i < bound.weights.size(); ++i) {
    const double w = bound.weights[i];
    if (w == 0.0) continue;
    const BarrierEval e = eval(i);
    out.grad_x += w * e.grad_x;
    out.hess_x += w * e.hess_x;
    out.blocks.push_back({i, w, w * e.grad_o, w * e.hess_o});
  }
  return out;
}

}  // namespace bcbf
