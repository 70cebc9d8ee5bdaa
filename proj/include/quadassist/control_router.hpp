#pragma once

#include <cstdint>
#include <string_view>
#include <variant>

#include "quadassist/kinematics.hpp"
#include "quadassist/quadstick.hpp"

namespace quadassist {

enum class ControlMode : std::uint8_t { BaseControl, EEFront, EETop };

inline bool is_ee_mode(ControlMode m) noexcept { return m != ControlMode::BaseControl; }
std::string_view to_string(ControlMode m) noexcept;

/// Body-frame base velocity command.
struct BaseTwistCommand {
  double vx = 0.0;
  double vy = 0.0;
  double wyaw = 0.0;

  bool is_zero() const noexcept { return vx == 0.0 && vy == 0.0 && wyaw == 0.0; }
  bool operator==(const BaseTwistCommand&) const = default;
};

/// End-effector twist in the robot base frame.
struct EETwistCommand {
  double vx = 0.0;
  double vy = 0.0;
  double vz = 0.0;
  double wroll = 0.0;
  double wpitch = 0.0;
  double wyaw = 0.0;

  bool is_zero() const noexcept {
    return vx == 0.0 && vy == 0.0 && vz == 0.0 && wroll == 0.0 && wpitch == 0.0 &&
           wyaw == 0.0;
  }
  bool operator==(const EETwistCommand&) const = default;
};

enum class GripperAction : std::uint8_t { Hold, Open, Close };
std::string_view to_string(GripperAction a) noexcept;

struct RoutedCommand {
  std::variant<BaseTwistCommand, EETwistCommand> motion;
  GripperAction gripper = GripperAction::Hold;
  ControlMode mode_after = ControlMode::BaseControl;

  bool motion_is_zero() const;
};

struct RateCaps {
  double base_vx = 0.5;
  double base_vy = 0.5;
  double base_wyaw = 0.7;
  double ee_linear = 0.15;
  double ee_angular = 0.5;
};

/// Control mode plus the EE mode a Suck on channel 0 returns to.
struct ControlModeState {
  ControlMode mode = ControlMode::BaseControl;
  ControlMode last_ee_mode = ControlMode::EEFront;

  bool operator==(const ControlModeState&) const = default;
};

/// Canonical arm joint vectors for the two EE modes.
struct RouterConfig {
  RateCaps caps;
  ArmVector q_front = (ArmVector() << 0.0, -0.3, 0.9, 0.0, -0.6, 0.0).finished();
  ArmVector q_top = (ArmVector() << 0.0, -0.4, 1.2, 0.0, 0.7707963267948966, 0.0).finished();
};

/// Blow edge on channel 0 -> BaseControl; Suck edge -> most recent EE mode;
/// button rising edge in an EE mode toggles Front <-> Top.
ControlModeState update_control_mode(const ControlModeState& state,
                                     const QuadstickFrame& frame,
                                     const QuadstickFrame& prev_frame);

/// The configuration an EE mode starts from: base pose unchanged, arm set to
/// the mode's canonical joints. Throws ContractError for BaseControl.
RobotConfiguration initial_configuration(ControlMode mode, const RobotConfiguration& current,
                                         const RouterConfig& config);

/// Joystick and channel routing (primary/secondary axis tables, channel 1 as
/// third axis, channel 2 as gripper). Channel 3 is never read.
RoutedCommand route_axes(const QuadstickFrame& frame, ControlMode mode, MappingMode mapping,
                         const RateCaps& caps);

/// route_axes, but with all motion suppressed while a mapping switch is pending.
RoutedCommand route_frame(const QuadstickFrame& frame, ControlMode mode,
                          const MappingModeState& mapping, const RateCaps& caps);

/// Rotates a base-frame EE command into a world-frame twist.
Twist to_world_twist(const EETwistCommand& cmd, double base_yaw);

}  // namespace quadassist
