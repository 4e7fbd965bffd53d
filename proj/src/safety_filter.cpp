#include "bcbf/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bcbf/errors.hpp"

namespace bcbf {

void FilterConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("filter gamma must be >= 0");
  if (!(h_min > 0.0)) throw std::invalid_argument("filter h_min must be > 0");
  if (!(diagnostic_tau > 0.0 && diagnostic_tau < 1.0)) {
    throw std::invalid_argument("filter diagnostic_tau must lie in (0, 1)");
  }
  QpSpec probe;
  probe.Q = Q;
  probe.lo = u_lo;
  probe.hi = u_hi;
  probe.validate();
  risk.validate();
}

CbfConstraint assemble_constraint(const BcbfEval& bcbf, const RobotState& x, const ModelParams& params,
                                  const Vec2& v_est, const FilterConfig& cfg, NonpositivePolicy policy) {
  const double h = bcbf.h_tilde;
  const bool positive = h > 0.0;
  if (!positive && policy == NonpositivePolicy::kThrow) {
    throw BarrierNonpositive("composed barrier is non-positive (" + std::to_string(h) + ")");
  }
  const double inv_h = positive ? 1.0 / std::max(h, cfg.h_min) : 0.0;

  const Vec3& sigma = params.sigma_diag;
  const Vec2& d = params.d_diag;

  double robot_terms = bcbf.grad_x.dot(robot_drift_free(x));
  robot_terms += 0.5 * (sigma.array().square() * bcbf.hess_x.diagonal().array()).sum();
  robot_terms -= (bcbf.grad_x.array() * sigma.array()).square().sum() * inv_h;

  double belief_terms = 0.0;
  double belief_sq = 0.0;
  for (const auto& blk : bcbf.blocks) {
    belief_terms += blk.grad.dot(v_est);
    belief_terms += 0.5 * (d.array().square() * blk.hess.diagonal().array()).sum();
    belief_sq += (blk.grad.array() * d.array()).square().sum();
  }
  belief_terms -= belief_sq * inv_h;

  CbfConstraint c;
  c.lin_u = robot_input_matrix(x).transpose() * bcbf.grad_x;
  c.rhs = -cfg.gamma * h * h * h - (robot_terms + belief_terms);
  return c;
}

ControlInput reference_controller(const RobotState& x, const Vec2& target, const ReferenceGains& gains,
                                  const Vec2& lo, const Vec2& hi) {
  const double dx = target.x() - x.px;
  const double dy = target.y() - x.py;
  const double rho = std::hypot(dx, dy);
  if (rho < 1e-3) return {0.0, 0.0};
  const double alpha = wrap_angle(std::atan2(dy, dx) - x.theta);
  const Vec2 u(gains.k_rho * rho * std::cos(alpha), gains.k_alpha * alpha);
  return ControlInput::from_vector(u.cwiseMax(lo).cwiseMin(hi));
}

SafetyFilter::SafetyFilter(BarrierKind kind, const ModelParams& params, const FilterConfig& cfg,
                           const ReferenceGains& gains, std::size_t n_samples)
    : kind_(kind), params_(params), cfg_(cfg), gains_(gains), n_(n_samples) {
  params_.validate();
  cfg_.validate();
  const double lb = kind_ == BarrierKind::kFov ? fov_essential_lb(params_) : collision_essential_lb(params_);
  const RiskSpec spec = cfg_.risk.with_essential_lb(lb);
  const std::size_t count = kind_ == BarrierKind::kFov ? 2 : 1;
  evaluators_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) evaluators_.emplace_back(spec, n_);
}

void SafetyFilter::fill_values(std::size_t i, const RobotState& x, const BeliefState& belief,
                               std::vector<double>& values) const {
  // Batched form of the per-sample barrier values, trigonometry hoisted out of the loop.
  values.resize(belief.size());
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  if (kind_ == BarrierKind::kCollision) {
    const double ox = x.px + params_.s_e * c;
    const double oy = x.py + params_.s_e * s;
    const double radius = params_.r_e + params_.r_o;
    for (std::size_t k = 0; k < belief.size(); ++k) {
      const double n = std::hypot(ox - belief.samples[k].qx, oy - belief.samples[k].qy);
      if (n < 1e-9) throw DegenerateGeometry("collision barrier undefined: offset vector vanishes");
      values[k] = n - radius;
    }
    return;
  }
  const double half = 0.5 * params_.beta;
  const double t = std::tan(half);
  const double offset = params_.r_o / std::cos(half);
  const double sg = i == 0 ? -1.0 : 1.0;
  for (std::size_t k = 0; k < belief.size(); ++k) {
    const double dx = belief.samples[k].qx - x.px;
    const double dy = belief.samples[k].qy - x.py;
    values[k] = t * (c * dx + s * dy) - offset + sg * (-s * dx + c * dy);
  }
}

BarrierEval SafetyFilter::barrier_eval(std::size_t i, const RobotState& x, const ObjectState& o) const {
  if (kind_ == BarrierKind::kCollision) return collision_barrier(x, o, params_);
  return fov_barrier(x, o, params_, i == 0 ? FovSide::kFirst : FovSide::kSecond);
}

BcbfEval SafetyFilter::compose(std::size_t i, const RobotState& x, const BeliefState& belief) const {
  std::vector<double> values;
  fill_values(i, x, belief, values);
  const BoundResult bound = evaluators_.at(i)(values);
  return compose_bcbf_active(bound, [&](std::size_t s) { return barrier_eval(i, x, belief.samples[s]); });
}

FilterOutput SafetyFilter::step(const RobotState& x, const BeliefState& belief, const Vec2& v_est,
                                const Vec2& target) const {
  if (belief.size() != n_) {
    throw std::invalid_argument("safety filter built for " + std::to_string(n_) + " samples, belief has " +
                                std::to_string(belief.size()));
  }
  FilterOutput out;
  out.u_ref = reference_controller(x, target, gains_, cfg_.u_lo, cfg_.u_hi);

  QpSpec qp;
  qp.Q = cfg_.Q;
  qp.u_ref = out.u_ref.as_vector();
  qp.lo = cfg_.u_lo;
  qp.hi = cfg_.u_hi;

  std::vector<double> values(n_);
  for (std::size_t i = 0; i < evaluators_.size(); ++i) {
    fill_values(i, x, belief, values);
    const BoundResult bound = evaluators_[i](values);
    const BcbfEval bcbf =
        compose_bcbf_active(bound, [&](std::size_t s) { return barrier_eval(i, x, belief.samples[s]); });

    out.diag.h_tilde.push_back(bcbf.h_tilde);
    out.diag.empirical_var.push_back(empirical_var(values, cfg_.diagnostic_tau));
    if (bcbf.h_tilde <= 0.0) out.diag.flags |= kFlagNonpositive;
    out.constraints.push_back(
        assemble_constraint(bcbf, x, params_, v_est, cfg_, NonpositivePolicy::kDropCorrection));
  }
  out.diag.h_tilde_min = *std::min_element(out.diag.h_tilde.begin(), out.diag.h_tilde.end());
  out.diag.empirical_var_min = *std::min_element(out.diag.empirical_var.begin(), out.diag.empirical_var.end());

  qp.constraints = out.constraints;
  out.qp = solve_qp(qp);
  if (out.qp.status == QpStatus::kInfeasible) out.diag.flags |= kFlagInfeasible;
  out.u = ControlInput::from_vector(out.qp.u);
  return out;
}

FilterOutput filter_step(BarrierKind kind, const RobotState& x, const BeliefState& belief, const ModelParams& params,
                         const FilterConfig& cfg, const ReferenceGains& gains, const Vec2& v_est,
                         const Vec2& target) {
  return SafetyFilter(kind, params, cfg, gains, belief.size()).step(x, belief, v_est, target);
}

}  // namespace bcbf
