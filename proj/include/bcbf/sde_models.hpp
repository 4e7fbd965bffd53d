#pragma once

// Stochastic unicycle robot and single-integrator object, plus the fixed-step
// Euler-Maruyama integrator shared by ground truth and belief propagation.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bcbf/linalg.hpp"

namespace bcbf {

struct RobotState {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;

  Vec3 as_vector() const { return {px, py, theta}; }
  static RobotState from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

struct ControlInput {
  double v = 0.0;
  double omega = 0.0;

  Vec2 as_vector() const { return {v, omega}; }
  static ControlInput from_vector(const Vec2& u) { return {u.x(), u.y()}; }
};

struct ObjectState {
  double qx = 0.0;
  double qy = 0.0;

  Vec2 as_vector() const { return {qx, qy}; }
  static ObjectState from_vector(const Vec2& q) { return {q.x(), q.y()}; }
};

struct ModelParams {
  Vec3 sigma_diag{0.03, 0.03, 0.01};
  Vec2 d_diag{0.1, 0.1};
  double r_e = 0.25;
  double r_o = 0.25;
  double s_e = 0.1;
  double beta = 40.0 * std::numbers::pi / 180.0;  // FoV amplitude [rad]
  double workspace_radius = 20.0;
  Vec2 object_velocity{0.0, 0.0};

  void validate() const;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// f(x) for the unicycle: identically zero.
Vec3 robot_drift_free(const RobotState& x);

/// g(x) for the unicycle: columns are the effects of u_v and u_omega.
Mat32 robot_input_matrix(const RobotState& x);

/// f(x) + g(x) u.
Vec3 robot_drift(const RobotState& x, const ControlInput& u);

Vec2 object_drift(const ObjectState& o, const Vec2& velocity);

/// state + drift*dt + diffusion (.) sqrt(dt) (.) noise, elementwise.
template <int N>
Eigen::Matrix<double, N, 1> em_step(const Eigen::Matrix<double, N, 1>& state,
                                    const Eigen::Matrix<double, N, 1>& drift,
                                    const Eigen::Matrix<double, N, 1>& diffusion_diag, double dt,
                                    const Eigen::Matrix<double, N, 1>& gaussian_noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step requires dt > 0");
  return state + drift * dt + (diffusion_diag.array() * std::sqrt(dt) * gaussian_noise.array()).matrix();
}

/// One Euler-Maruyama step of the robot SDE; theta is re-wrapped afterwards.
RobotState step_robot(const RobotState& x, const ControlInput& u, const Vec3& sigma_diag, double dt,
                      const Vec3& noise);

ObjectState step_object(const ObjectState& o, const Vec2& velocity, const Vec2& d_diag, double dt,
                        const Vec2& noise);

}  // namespace bcbf
