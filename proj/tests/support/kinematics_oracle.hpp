#pragma once

// Central finite-difference Jacobian and random in-limit configurations.

#include <random>

#include "quadassist/kinematics.hpp"

namespace quadassist::testing {

inline RobotConfiguration random_config(std::mt19937_64& gen, const RobotModel& model) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RobotConfiguration c;
  c.base_x = -3.0 + 6.0 * u(gen);
  c.base_y = -3.0 + 6.0 * u(gen);
  c.base_yaw = normalize_angle(-4.0 + 8.0 * u(gen));
  for (int i = 0; i < kArmJoints; ++i) {
    const auto& j = model.joints[i];
    c.arm_q[i] = j.lower + (j.upper - j.lower) * u(gen);
  }
  return c;
}

inline RobotConfiguration perturbed(RobotConfiguration c, int dof, double h) {
  if (dof == 0) c.base_x += h;
  else if (dof == 1) c.base_y += h;
  else if (dof == 2) c.base_yaw += h;
  else c.arm_q[dof - kBaseDofs] += h;
  return c;
}

inline Jacobian finite_difference_jacobian(const RobotConfiguration& c, const RobotModel& model,
                                           double h) {
  Jacobian fd;
  for (int k = 0; k < kDofs; ++k) {
    // Perturbations bypass sanitize so joints at a limit still difference cleanly.
    const auto plus = forward_kinematics(perturbed(c, k, h), model);
    const auto minus = forward_kinematics(perturbed(c, k, -h), model);
    fd.block<3, 1>(0, k) = (plus.position - minus.position) / (2 * h);
    const Eigen::AngleAxisd d(plus.orientation * minus.orientation.conjugate());
    fd.block<3, 1>(3, k) = d.axis() * d.angle() / (2 * h);
  }
  return fd;
}

// Largest column error of the analytic Jacobian relative to max(1, |column|).
inline double jacobian_relative_error(const RobotConfiguration& c, const RobotModel& model) {
  const Jacobian j = jacobian(c, model);
  const Jacobian fd = finite_difference_jacobian(c, model, 1e-6);
  double worst = 0.0;
  for (int k = 0; k < kDofs; ++k) {
    const double scale = std::max(1.0, j.col(k).norm());
    worst = std::max(worst, (j.col(k) - fd.col(k)).norm() / scale);
  }
  return worst;
}

}  // namespace quadassist::testing
