#include "quadassist/locomotion.hpp"

#include <algorithm>
#include <cmath>

#include "quadassist/errors.hpp"

namespace quadassist {

namespace {

double slew(double current, double target, double max_delta) {
  return current + std::clamp(target - current, -max_delta, max_delta);
}

}  // namespace

BaseState step_base(const BaseState& state, const BaseTwistCommand& cmd, double dt,
                    const LocomotionLimits& limits) {
  if (!(dt > 0.0)) throw ContractError("step_base: dt must be positive");
  BaseState next = state;

  // Linear velocity slews as a vector so the direction of travel is preserved.
  const double dvx = cmd.vx - state.vx;
  const double dvy = cmd.vy - state.vy;
  const double dv = std::hypot(dvx, dvy);
  const double max_dv = limits.linear_accel * dt;
  if (dv <= max_dv) {
    next.vx = cmd.vx;
    next.vy = cmd.vy;
  } else {
    next.vx = state.vx + dvx * (max_dv / dv);
    next.vy = state.vy + dvy * (max_dv / dv);
  }
  const double speed = std::hypot(next.vx, next.vy);
  if (speed > limits.max_speed) {
    const double s = limits.max_speed / speed;
    next.vx *= s;
    next.vy *= s;
  }
  next.wyaw = std::clamp(slew(state.wyaw, cmd.wyaw, limits.yaw_accel * dt),
                         -limits.yaw_rate_cap, limits.yaw_rate_cap);

  // Exact SE(2) integration of a constant body twist.
  const double th = next.wyaw * dt;
  double bx = next.vx * dt;
  double by = next.vy * dt;
  if (std::abs(th) > 1e-12) {
    const double s = std::sin(th) / th;
    const double c = (1.0 - std::cos(th)) / th;
    const double ux = s * bx - c * by;
    const double uy = c * bx + s * by;
    bx = ux;
    by = uy;
  }
  const double cy = std::cos(state.yaw);
  const double sy = std::sin(state.yaw);
  next.x = state.x + cy * bx - sy * by;
  next.y = state.y + sy * bx + cy * by;
  next.yaw = normalize_angle(state.yaw + th);
  return next;
}

BaseTwistCommand goto_target(const BaseState& state, const BasePoseTarget& target,
                             const RateCaps& caps, const GotoGains& gains) {
  BaseTwistCommand cmd;
  const double ex = target.x - state.x;
  const double ey = target.y - state.y;
  const double eyaw = normalize_angle(target.yaw - state.yaw);

  if (std::hypot(ex, ey) >= gains.position_tolerance) {
    const double cy = std::cos(state.yaw);
    const double sy = std::sin(state.yaw);
    const double bx = cy * ex + sy * ey;
    const double by = -sy * ex + cy * ey;
    cmd.vx = gains.kp_linear * bx;
    cmd.vy = gains.kp_linear * by;
    double scale = 1.0;
    if (std::abs(cmd.vx) > caps.base_vx) scale = std::min(scale, caps.base_vx / std::abs(cmd.vx));
    if (std::abs(cmd.vy) > caps.base_vy) scale = std::min(scale, caps.base_vy / std::abs(cmd.vy));
    cmd.vx *= scale;
    cmd.vy *= scale;
  }
  if (std::abs(eyaw) >= gains.yaw_tolerance) {
    cmd.wyaw = std::clamp(gains.kp_yaw * eyaw, -caps.base_wyaw, caps.base_wyaw);
  }
  return cmd;
}

}  // namespace quadassist
