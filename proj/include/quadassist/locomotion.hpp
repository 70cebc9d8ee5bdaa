#pragma once

#include "quadassist/control_router.hpp"

namespace quadassist {

/// Pose in the world, velocities in the body frame.
struct BaseState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double wyaw = 0.0;

  bool operator==(const BaseState&) const = default;
};

struct LocomotionLimits {
  double max_speed = 1.3;       // m/s, planar norm
  double yaw_rate_cap = 1.0;    // rad/s
  double linear_accel = 2.0;    // m/s^2; +inf for instant response
  double yaw_accel = 2.0;       // rad/s^2
};

struct BasePoseTarget {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

struct GotoGains {
  double kp_linear = 1.0;
  double kp_yaw = 1.5;
  double position_tolerance = 0.02;
  double yaw_tolerance = 0.02;
};

/// Slews velocity toward cmd under acceleration limits, clamps the planar
/// speed to max_speed, then integrates the body-frame twist exactly over dt.
BaseState step_base(const BaseState& state, const BaseTwistCommand& cmd, double dt,
                    const LocomotionLimits& limits);

/// Proportional go-to-pose command saturated at the teleop caps.
BaseTwistCommand goto_target(const BaseState& state, const BasePoseTarget& target,
                             const RateCaps& caps, const GotoGains& gains = {});

}  // namespace quadassist
