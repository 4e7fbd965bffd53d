#include "bcbf/barriers.hpp"

#include <cmath>
#include <stdexcept>

#include "bcbf/errors.hpp"

namespace bcbf {

std::vector<std::size_t> BcbfEval::active_set() const {
  std::vector<std::size_t> out;
  out.reserve(blocks.size());
  for (const auto& blk : blocks) out.push_back(blk.index);
  return out;
}

Vec2 local_frame(const RobotState& x, const ObjectState& o) {
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  const double dx = o.qx - x.px;
  const double dy = o.qy - x.py;
  return {c * dx + s * dy, -s * dx + c * dy};
}

ObjectState world_frame(const RobotState& x, const Vec2& local) {
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  return {x.px + c * local.x() - s * local.y(), x.py + s * local.x() + c * local.y()};
}

namespace {

inline double side_sign(FovSide side) { return side == FovSide::kFirst ? -1.0 : 1.0; }

}  // namespace

double fov_barrier_value(const RobotState& x, const ObjectState& o, const ModelParams& params, FovSide side) {
  const Vec2 l = local_frame(x, o);
  const double half = 0.5 * params.beta;
  return std::tan(half) * l.x() - params.r_o / std::cos(half) + side_sign(side) * l.y();
}

BarrierEval fov_barrier(const RobotState& x, const ObjectState& o, const ModelParams& params, FovSide side) {
  const double half = 0.5 * params.beta;
  const double t = std::tan(half);
  const double sg = side_sign(side);
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  const double dx = o.qx - x.px;
  const double dy = o.qy - x.py;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;

  BarrierEval e;
  e.h = t * lx - params.r_o / std::cos(half) + sg * ly;
  // d(lx)/dx = (-c, -s, ly), d(ly)/dx = (s, -c, -lx)
  e.grad_x = t * Vec3(-c, -s, ly) + sg * Vec3(s, -c, -lx);
  const double h_pxth = t * s + sg * c;
  const double h_pyth = -t * c + sg * s;
  e.hess_x << 0.0, 0.0, h_pxth,
              0.0, 0.0, h_pyth,
              h_pxth, h_pyth, -t * lx - sg * ly;
  e.grad_o = t * Vec2(c, s) + sg * Vec2(-s, c);
  e.hess_o.setZero();
  return e;
}

namespace {

Vec2 offset_vector(const RobotState& x, const ObjectState& o, double s_e, double c, double s) {
  return {x.px - o.qx + s_e * c, x.py - o.qy + s_e * s};
}

}  // namespace

double collision_barrier_value(const RobotState& x, const ObjectState& o, const ModelParams& params) {
  const Vec2 p = offset_vector(x, o, params.s_e, std::cos(x.theta), std::sin(x.theta));
  const double n = p.norm();
  if (n < 1e-9) throw DegenerateGeometry("collision barrier undefined: offset vector vanishes");
  return n - (params.r_e + params.r_o);
}

BarrierEval collision_barrier(const RobotState& x, const ObjectState& o, const ModelParams& params) {
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  const double se = params.s_e;
  const Vec2 p = offset_vector(x, o, se, c, s);
  const double n = p.norm();
  if (n < 1e-9) throw DegenerateGeometry("collision barrier undefined: offset vector vanishes");
  const Vec2 u = p / n;
  const Mat2 proj = (Mat2::Identity() - u * u.transpose()) / n;

  Eigen::Matrix<double, 2, 3> jac;
  jac << 1.0, 0.0, -se * s,
         0.0, 1.0, se * c;

  BarrierEval e;
  e.h = n - (params.r_e + params.r_o);
  e.grad_x = jac.transpose() * u;
  e.hess_x = jac.transpose() * proj * jac;
  // second derivative of the offset along theta is -s_e (cos, sin)
  e.hess_x(2, 2) += u.dot(Vec2(-se * c, -se * s));
  e.grad_o = -u;
  e.hess_o = proj;
  return e;
}

double collision_essential_lb(const ModelParams& params) { return -(params.r_e + params.r_o); }

double fov_essential_lb(const ModelParams& params) {
  const double half = 0.5 * params.beta;
  const double r = params.workspace_radius;
  return -(std::tan(half) * r + params.r_o / std::cos(half) + r);
}

BcbfEval compose_bcbf(std::span<const BarrierEval> evals, const BoundResult& bound) {
  if (evals.size() != bound.weights.size()) {
    throw std::invalid_argument("compose_bcbf: " + std::to_string(evals.size()) + " evaluations but " +
                                std::to_string(bound.weights.size()) + " weights");
  }
  return compose_bcbf_active(bound, [&](std::size_t i) { return evals[i]; });
}

}  // namespace bcbf
