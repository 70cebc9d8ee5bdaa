#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

namespace quadassist {

inline constexpr int kArmJoints = 6;
inline constexpr int kBaseDofs = 3;
inline constexpr int kDofs = kBaseDofs + kArmJoints;

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Vector9 = Eigen::Matrix<double, kDofs, 1>;
using ArmVector = Eigen::Matrix<double, kArmJoints, 1>;
using Jacobian = Eigen::Matrix<double, 6, kDofs>;
/// World-frame twist: linear (m/s) then angular (rad/s).
using Twist = Vector6;

/// Planar base pose plus six arm joint angles. Rate vectors use the same
/// ordering: base x, base y, base yaw, q1..q6.
struct RobotConfiguration {
  double base_x = 0.0;
  double base_y = 0.0;
  double base_yaw = 0.0;
  ArmVector arm_q = ArmVector::Zero();

  bool operator==(const RobotConfiguration& o) const {
    return base_x == o.base_x && base_y == o.base_y && base_yaw == o.base_yaw &&
           arm_q == o.arm_q;
  }
};

struct EEPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct JointSpec {
  std::string name;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();    // unit, in the parent frame
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();   // offset from parent frame, meters
  double lower = -3.0;
  double upper = 3.0;
};

/// Collision proxy. A sphere is a capsule whose endpoints coincide.
struct ProxyBody {
  std::string name;
  std::string frame;  // "base", a joint name, or "tool"
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

struct RobotModel {
  std::string name = "quadruped_arm";
  std::vector<JointSpec> joints;  // exactly six, base to wrist
  Eigen::Vector3d tool_offset = Eigen::Vector3d::Zero();
  std::vector<ProxyBody> proxies;
  /// Proxy name pairs never checked against each other (adjacent links).
  std::vector<std::pair<std::string, std::string>> ignored_pairs;

  /// The bundled quadruped-with-arm model.
  static RobotModel standard();
  /// Throws ScenarioError on malformed input.
  static RobotModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Per-DoF motion penalties and damping for the whole-body solve.
/// A penalty of +infinity locks that DoF.
struct WholeBodyWeights {
  std::array<double, kDofs> penalty{10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  double damping = 0.05;

  void validate() const;  // throws ConfigError
};

/// Post-solve safety projection parameters.
struct RateProjection {
  double lookahead_dt = 0.01;
  double limit_margin = 0.01;      // rad; near-limit band
  double collision_margin = 0.01;  // m; separation kept when possible
  int max_halvings = 12;
  double clearance_band = 0.1;      // m above collision_margin where pairs constrain the solve
  double clearance_recovery = 0.5;  // 1/s; allowed separation rate per metre from the margin
};

struct ForwardKinematicsResult {
  /// World transform of each joint frame (after its rotation), index 0..5.
  std::array<Eigen::Isometry3d, kArmJoints> joint_frames;
  Eigen::Isometry3d base_frame = Eigen::Isometry3d::Identity();
  Eigen::Isometry3d tool_frame = Eigen::Isometry3d::Identity();
};

double normalize_angle(double angle);

/// Clamps arm joints to limits and normalizes yaw.
RobotConfiguration sanitize(const RobotConfiguration& config, const RobotModel& model);
bool within_limits(const RobotConfiguration& config, const RobotModel& model);

ForwardKinematicsResult forward_kinematics_frames(const RobotConfiguration& config,
                                                  const RobotModel& model);
EEPose forward_kinematics(const RobotConfiguration& config, const RobotModel& model);

/// Geometric Jacobian of the tool frame, world-frame twist convention.
Jacobian jacobian(const RobotConfiguration& config, const RobotModel& model);

/// Weighted damped least squares, then joint-limit and self-collision projection.
/// Joints pushing into a limit are locked and proxy pairs closing inside the
/// clearance band are held, and the task is re-solved over what remains.
Vector9 solve_whole_body_rates(const RobotConfiguration& config, const Twist& target_twist,
                               const WholeBodyWeights& weights, const RobotModel& model,
                               const RateProjection& projection = {});

/// The unprojected weighted DLS solution W^-1 J^T (J W^-1 J^T + l^2 I)^-1 v.
Vector9 dls_rates(const Jacobian& jac, const Twist& target_twist,
                  const WholeBodyWeights& weights);

/// Applies the joint-limit and collision lookahead projection to any rate vector.
Vector9 project_rates(const RobotConfiguration& config, const Vector9& rates,
                      const RobotModel& model, const RateProjection& projection);

struct ProxyPairDistance {
  std::string first;
  std::string second;
  double separation;  // surface distance, negative when penetrating
};

std::vector<ProxyPairDistance> proxy_separations(const RobotConfiguration& config,
                                                 const RobotModel& model);
double min_separation(const RobotConfiguration& config, const RobotModel& model);

/// Pairs "a|b" whose separation is below margin.
std::vector<std::string> check_self_collision(const RobotConfiguration& config,
                                              const RobotModel& model, double margin = 0.0);

/// Explicit Euler step. Arm joints are clamped to limits, yaw is normalized.
RobotConfiguration integrate_rates(const RobotConfiguration& config, const Vector9& rates,
                                   double dt, const RobotModel& model);

/// 6-vector pose error (position, then rotation vector), world frame.
Twist pose_error(const EEPose& current, const EEPose& target);

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1);

}  // namespace quadassist
