#include "quadassist/control_router.hpp"

#include <cmath>

#include "quadassist/errors.hpp"

namespace quadassist {

std::string_view to_string(ControlMode m) noexcept {
  switch (m) {
    case ControlMode::EEFront:
      return "EEFront";
    case ControlMode::EETop:
      return "EETop";
    case ControlMode::BaseControl:
      break;
  }
  return "BaseControl";
}

std::string_view to_string(GripperAction a) noexcept {
  switch (a) {
    case GripperAction::Open:
      return "Open";
    case GripperAction::Close:
      return "Close";
    case GripperAction::Hold:
      break;
  }
  return "Hold";
}

bool RoutedCommand::motion_is_zero() const {
  return std::visit([](const auto& m) { return m.is_zero(); }, motion);
}

ControlModeState update_control_mode(const ControlModeState& state,
                                     const QuadstickFrame& frame,
                                     const QuadstickFrame& prev_frame) {
  ControlModeState next = state;
  const BreathState now = frame.channels[kModeSwitchChannel];
  const BreathState before = prev_frame.channels[kModeSwitchChannel];

  if (now == BreathState::Blow && before != BreathState::Blow) {
    next.mode = ControlMode::BaseControl;
  } else if (now == BreathState::Suck && before != BreathState::Suck) {
    if (!is_ee_mode(next.mode)) next.mode = next.last_ee_mode;
  }

  if (frame.push_button && !prev_frame.push_button && is_ee_mode(next.mode)) {
    next.mode = next.mode == ControlMode::EEFront ? ControlMode::EETop : ControlMode::EEFront;
  }
  if (is_ee_mode(next.mode)) next.last_ee_mode = next.mode;
  return next;
}

RobotConfiguration initial_configuration(ControlMode mode, const RobotConfiguration& current,
                                         const RouterConfig& config) {
  RobotConfiguration out = current;
  switch (mode) {
    case ControlMode::EEFront:
      out.arm_q = config.q_front;
      return out;
    case ControlMode::EETop:
      out.arm_q = config.q_top;
      return out;
    case ControlMode::BaseControl:
      break;
  }
  throw ContractError("BaseControl has no initial arm configuration");
}

namespace {

double third_axis(BreathState s) {
  switch (s) {
    case BreathState::Blow:
      return 1.0;
    case BreathState::Suck:
      return -1.0;
    case BreathState::Neutral:
      break;
  }
  return 0.0;
}

GripperAction gripper_from(BreathState s) {
  switch (s) {
    case BreathState::Blow:
      return GripperAction::Open;
    case BreathState::Suck:
      return GripperAction::Close;
    case BreathState::Neutral:
      break;
  }
  return GripperAction::Hold;
}

}  // namespace

RoutedCommand route_axes(const QuadstickFrame& frame, ControlMode mode, MappingMode mapping,
                         const RateCaps& caps) {
  RoutedCommand out;
  out.mode_after = mode;
  out.gripper = gripper_from(frame.channels[kGripperChannel]);
  const double h = frame.joystick_h;
  const double v = frame.joystick_v;
  const double third = third_axis(frame.channels[kThirdAxisChannel]);

  if (mode == ControlMode::BaseControl) {
    BaseTwistCommand base;
    if (mapping == MappingMode::Primary) {
      base.vx = h * caps.base_vx;
      base.vy = v * caps.base_vy;
    }
    base.wyaw = third * caps.base_wyaw;
    out.motion = base;
    return out;
  }

  EETwistCommand ee;
  ee.vz = third * caps.ee_linear;
  if (mapping == MappingMode::Primary) {
    ee.vx = h * caps.ee_linear;
    ee.vy = v * caps.ee_linear;
  } else {
    ee.wroll = h * caps.ee_angular;
    if (mode == ControlMode::EEFront) {
      ee.wyaw = v * caps.ee_angular;
    } else {
      ee.wpitch = v * caps.ee_angular;
    }
  }
  out.motion = ee;
  return out;
}

RoutedCommand route_frame(const QuadstickFrame& frame, ControlMode mode,
                          const MappingModeState& mapping, const RateCaps& caps) {
  if (!mapping.transition_pending()) return route_axes(frame, mode, mapping.current, caps);
  RoutedCommand out;
  out.mode_after = mode;
  if (is_ee_mode(mode)) {
    out.motion = EETwistCommand{};
  } else {
    out.motion = BaseTwistCommand{};
  }
  out.gripper = gripper_from(frame.channels[kGripperChannel]);
  return out;
}

Twist to_world_twist(const EETwistCommand& cmd, double base_yaw) {
  const Eigen::Matrix3d r = Eigen::AngleAxisd(base_yaw, Eigen::Vector3d::UnitZ()).matrix();
  Twist t;
  t.head<3>() = r * Eigen::Vector3d(cmd.vx, cmd.vy, cmd.vz);
  t.tail<3>() = r * Eigen::Vector3d(cmd.wroll, cmd.wpitch, cmd.wyaw);
  return t;
}

}  // namespace quadassist
