#include "bcbf/sde_models.hpp"

#include <string>

namespace bcbf {

void ModelParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid model params: " + what); };
  if (!((sigma_diag.array() > 0.0).all())) fail("robot diffusion entries must be > 0");
  if (!((d_diag.array() > 0.0).all())) fail("object diffusion entries must be > 0");
  if (!(r_e > 0.0) || !(r_o > 0.0)) fail("radii must be > 0");
  if (!std::isfinite(s_e)) fail("s_e must be finite");
  if (!(beta > 0.0 && beta < std::numbers::pi)) fail("beta must lie in (0, pi)");
  if (!(workspace_radius > 0.0)) fail("workspace radius must be > 0");
  if (!object_velocity.allFinite()) fail("object velocity must be finite");
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Vec3 robot_drift_free(const RobotState&) { return Vec3::Zero(); }

Mat32 robot_input_matrix(const RobotState& x) {
  Mat32 g;
  g << std::cos(x.theta), 0.0,
       std::sin(x.theta), 0.0,
       0.0, 1.0;
  return g;
}

Vec3 robot_drift(const RobotState& x, const ControlInput& u) {
  return robot_drift_free(x) + robot_input_matrix(x) * u.as_vector();
}

Vec2 object_drift(const ObjectState&, const Vec2& velocity) { return velocity; }

RobotState step_robot(const RobotState& x, const ControlInput& u, const Vec3& sigma_diag, double dt,
                      const Vec3& noise) {
  RobotState next = RobotState::from_vector(em_step<3>(x.as_vector(), robot_drift(x, u), sigma_diag, dt, noise));
  next.theta = wrap_angle(next.theta);
  return next;
}

ObjectState step_object(const ObjectState& o, const Vec2& velocity, const Vec2& d_diag, double dt,
                        const Vec2& noise) {
  return ObjectState::from_vector(em_step<2>(o.as_vector(), object_drift(o, velocity), d_diag, dt, noise));
}

}  // namespace bcbf
