#pragma once

// Closed-loop pose servo used by the kinematics unit tests and the acceptance
// binary: twist = gain * pose error, solve, integrate.

#include <algorithm>
#include <cmath>
#include <random>

#include "quadassist/control_router.hpp"
#include "quadassist/kinematics.hpp"

namespace quadassist::testing {

struct ServoResult {
  bool converged = false;
  int ticks = 0;
  double position_error = 0.0;
  double angle_error = 0.0;  // radians
  int collision_reports = 0;
  RobotConfiguration final_config;
};

struct ServoSettings {
  double gain = 2.0;
  double max_linear = 0.5;
  double max_angular = 1.0;
  double dt = 0.01;
  int max_ticks = 2000;
  double position_tolerance = 1e-3;
  double angle_tolerance = 0.5 * 3.14159265358979323846 / 180.0;
};

inline ServoResult servo_to(RobotConfiguration config, const EEPose& target,
                            const RobotModel& model, const WholeBodyWeights& weights = {},
                            const ServoSettings& s = {}) {
  ServoResult r;
  for (int tick = 0;; ++tick) {
    const Twist err = pose_error(forward_kinematics(config, model), target);
    r.position_error = err.head<3>().norm();
    r.angle_error = err.tail<3>().norm();
    r.ticks = tick;
    if (r.position_error < s.position_tolerance && r.angle_error < s.angle_tolerance) {
      r.converged = true;
      break;
    }
    if (tick >= s.max_ticks) break;
    Twist twist = s.gain * err;
    const double lin = twist.head<3>().norm();
    if (lin > s.max_linear) twist.head<3>() *= s.max_linear / lin;
    const double ang = twist.tail<3>().norm();
    if (ang > s.max_angular) twist.tail<3>() *= s.max_angular / ang;
    config = integrate_rates(config, solve_whole_body_rates(config, twist, weights, model), s.dt,
                             model);
    if (!check_self_collision(config, model, 0.0).empty()) ++r.collision_reports;
  }
  r.final_config = config;
  return r;
}

// Reachable targets: the pose of a random collision-free configuration in the
// forward half of the arm workspace, near the start base pose.
inline EEPose random_reachable_target(std::mt19937_64& gen, const RobotModel& model) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(gen); };
  for (;;) {
    RobotConfiguration c;
    c.base_x = in(-0.3, 0.3);
    c.base_y = in(-0.3, 0.3);
    c.base_yaw = in(-0.4, 0.4);
    c.arm_q << in(-1.2, 1.2), in(-1.0, 0.3), in(0.3, 2.2), in(-1.5, 1.5), in(-1.5, 1.5),
        in(-2.5, 2.5);
    if (min_separation(c, model) < 0.03) continue;
    return forward_kinematics(c, model);
  }
}

}  // namespace quadassist::testing
