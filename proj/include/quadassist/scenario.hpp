#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "quadassist/control_router.hpp"
#include "quadassist/kinematics.hpp"
#include "quadassist/locomotion.hpp"
#include "quadassist/quadstick.hpp"
#include "quadassist/safety.hpp"
#include "quadassist/voice.hpp"

namespace quadassist {

/// Axis-aligned box in world coordinates.
struct Region {
  std::string name;
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

enum class ObjectKind : std::uint8_t { Rigid, Revolute, Prismatic };
std::string_view to_string(ObjectKind k) noexcept;

/// Grasping (or grabbing) is refused until another articulation is open enough.
struct GraspRequirement {
  std::string object;
  double at_least = 0.0;  // rad for revolute, m for prismatic
};

struct ObjectSpec {
  std::string name;
  ObjectKind kind = ObjectKind::Rigid;

  // Rigid objects: initial pose and grasp geometry.
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double grasp_radius = 0.04;
  double width = 0.03;  // gripper width while holding it
  std::optional<std::string> mount;  // moves with this articulation until grasped
  std::vector<Eigen::Vector3d> endpoints;  // object-frame points, e.g. scarf ends

  // Articulations: a 1-DoF joint with a handle the gripper can grab.
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();   // hinge point or slide origin
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();    // hinge axis or slide direction
  Eigen::Vector3d handle = Eigen::Vector3d::Zero();   // handle offset from origin at value 0
  double lower = 0.0;
  double upper = 0.0;
  double initial = 0.0;

  std::optional<GraspRequirement> requires_open;

  bool is_articulation() const noexcept { return kind != ObjectKind::Rigid; }
};

enum class SubgoalType : std::uint8_t {
  ArticulationAtLeast,
  ReleasedInRegion,
  TouchSuccess,
  EndpointsInRegion
};
std::string_view to_string(SubgoalType t) noexcept;

struct SubgoalSpec {
  std::string id;
  SubgoalType type = SubgoalType::ArticulationAtLeast;
  std::string object;  // optional for TouchSuccess (then any held object counts)
  std::string region;
  double threshold = 0.0;  // rad or m, for ArticulationAtLeast
  std::vector<std::string> after;  // subgoal ids of the same task
  int points = 1;
};

struct TaskSpec {
  std::string name;
  std::vector<SubgoalSpec> subgoals;
};

/// Optional sinusoidal head sway around the static pose.
struct HeadMotion {
  Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
  double period = 4.0;
};

/// Camera rigidly attached to an arm frame.
struct CameraMount {
  std::string frame = "shoulder_yaw";  // "base", a joint name or "tool"
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  Eigen::Vector3d forward = Eigen::Vector3d::UnitX();
  double half_fov = 0.75;
  double min_range = 0.1;
  double max_range = 2.5;
};

struct GripperConfig {
  double max_width = 0.1;
  double speed = 0.25;  // m/s
};

struct WholeBodyConfig {
  WholeBodyWeights weights;
  RateProjection projection;
  double base_assist_cap = 0.25;  // m per EE-mode session
  double homing_rate = 1.0;       // rad/s per joint
  double homing_tolerance = 1e-6;
  int homing_stall_ticks = 100;
};

struct SafetyConfig {
  FaceTouchConfig face_touch;
  WrenchModel wrench;
  double reach_tolerance = 0.005;  // IK residual accepted for the standoff point
};

struct SimConfig {
  QuadstickConfig quadstick;
  RouterConfig router;
  WholeBodyConfig kinematics;
  LocomotionLimits locomotion;
  SafetyConfig safety;
  KeywordTable voice = KeywordTable::defaults();
  GripperConfig gripper;
  double frame_timeout = 0.25;  // s, served sessions only
};

struct TaskScenario {
  std::string name;
  std::string version;
  std::string digest;  // SHA-256 of the canonical scenario json

  double dt = 0.01;
  double duration = 600.0;
  std::uint64_t seed = 0;

  RobotConfiguration initial_robot;
  std::vector<Region> regions;
  std::vector<ObjectSpec> objects;
  HeadPose head;
  HeadMotion head_motion;
  CameraMount camera;

  std::vector<TaskSpec> tasks;
  RobotModel robot_model = RobotModel::standard();
  SimConfig config;

  nlohmann::json source;  // the parsed file, robot model inlined

  int object_index(std::string_view name) const;  // -1 if absent
  const Region* region(std::string_view name) const;
  int max_points() const;
  std::int64_t duration_ticks() const;
};

/// Parses and validates. Errors name the line (syntax) or the field path.
TaskScenario load_scenario(const std::filesystem::path& path);
TaskScenario scenario_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir = {});
TaskScenario scenario_from_text(const std::string& text,
                                const std::filesystem::path& base_dir = {});

/// Compact summary for clients: geometry, regions, tasks, robot model.
nlohmann::json scenario_summary(const TaskScenario& s);

}  // namespace quadassist
