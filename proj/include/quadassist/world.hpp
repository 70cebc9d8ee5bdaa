#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "quadassist/control_router.hpp"
#include "quadassist/digest.hpp"
#include "quadassist/kinematics.hpp"
#include "quadassist/locomotion.hpp"
#include "quadassist/quadstick.hpp"
#include "quadassist/rng.hpp"
#include "quadassist/safety.hpp"
#include "quadassist/scenario.hpp"

namespace quadassist {

struct ObjectState {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();  // rigid objects
  double value = 0.0;                                      // articulations
  bool mounted = false;  // still riding on its mount articulation
  bool ever_held = false;
};

enum class Activity : std::uint8_t { Idle, Locomotion, Manipulation };
std::string_view to_string(Activity a) noexcept;

struct SubgoalStatus {
  bool done = false;
  std::int64_t tick = -1;
};

/// Everything that evolves during a run. Copyable; snapshots are plain copies.
struct WorldState {
  std::int64_t tick_index = 0;
  double sim_time = 0.0;

  BaseState base;
  ArmVector arm_q = ArmVector::Zero();

  double gripper_width = 0.0;
  double gripper_target = 0.0;
  int held_object = -1;  // rigid object index
  int grabbed_articulation = -1;
  Eigen::Isometry3d held_relative = Eigen::Isometry3d::Identity();  // EE^-1 * object
  std::vector<ObjectState> objects;
  std::vector<Eigen::Isometry3d> mount_origin;  // object pose at its mount's initial value

  HeadPose head;

  QuadstickFrame raw_frame;   // as received, timestamp = tick time
  QuadstickFrame last_frame;  // after deadzone
  MappingModeState mapping;
  ControlModeState control;
  RoutedCommand routed;  // after stop and autonomy overrides

  bool homing = false;
  ArmVector homing_target = ArmVector::Zero();
  int homing_stall = 0;
  Eigen::Vector2d session_anchor = Eigen::Vector2d::Zero();

  FaceTouchPipeline face_touch;
  ArmVector face_touch_home = ArmVector::Zero();
  bool stop_latched = false;

  WrenchReading wrench;
  bool collision_active = false;

  std::vector<std::vector<SubgoalStatus>> subgoals;  // [task][subgoal]
  std::vector<std::int64_t> task_done_tick;          // -1 while open

  Activity activity = Activity::Idle;
  bool ended = false;
  std::int64_t locomotion_ticks = 0;
  std::int64_t manipulation_ticks = 0;
  std::int64_t idle_ticks = 0;

  DeterministicRng rng;

  RobotConfiguration robot() const {
    return RobotConfiguration{base.x, base.y, base.yaw, arm_q};
  }
};

struct WorldEvent {
  std::string kind;
  nlohmann::json payload;
};

struct StepResult {
  std::vector<WorldEvent> events;  // in emission order, digest line excluded
  std::string digest;              // chain value after this tick, 64 hex chars
};

/// Deterministic fixed-step simulation of one run.
class SimWorld {
 public:
  explicit SimWorld(TaskScenario scenario, std::optional<std::uint64_t> seed = std::nullopt);

  /// Advances one tick. `frame` is the raw pilot input (deadzone applied here);
  /// its timestamp is replaced by the tick time. dt must equal the scenario dt.
  StepResult step(const QuadstickFrame& frame, const std::vector<std::string>& transcripts,
                  double dt);
  StepResult step(const QuadstickFrame& frame, const std::vector<std::string>& transcripts = {}) {
    return step(frame, transcripts, scenario_.dt);
  }

  const WorldState& state() const noexcept { return state_; }
  const TaskScenario& scenario() const noexcept { return scenario_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& digest() const noexcept { return digest_hex_; }

  bool all_tasks_complete() const;
  bool finished() const;  // all subgoals latched or duration reached
  int points() const;

  EEPose ee_pose() const;
  Eigen::Vector3d object_position(int index) const;
  /// World position of an articulation handle at its current value.
  Eigen::Vector3d handle_position(int index) const;
  /// Object-frame endpoints mapped to the world.
  std::vector<Eigen::Vector3d> endpoints_world(int index) const;
  Eigen::Isometry3d articulation_transform(int index, double value) const;
  bool requirement_met(int index) const;

  /// Immutable snapshot for clients.
  nlohmann::json snapshot() const;
  /// Bytes hashed into the digest chain, without events.
  std::string state_bytes() const;

 private:
  struct Latches;
  void handle_voice(const std::vector<std::string>& transcripts, std::vector<WorldEvent>& ev,
                    Latches& latch);
  void start_homing(ControlMode mode, std::vector<WorldEvent>& ev);
  bool homing_step(const ArmVector& target, std::vector<WorldEvent>& ev, const char* purpose);
  Vector9 cartesian_rates(const Eigen::Vector3d& velocity, bool retracting) const;
  bool reachable(const Eigen::Vector3d& point) const;
  CameraModel camera_now() const;
  void update_gripper(GripperAction action, std::vector<WorldEvent>& ev);
  void update_objects(std::vector<WorldEvent>& ev);
  void update_wrench(std::vector<WorldEvent>& ev);
  void evaluate_tasks(bool touch_succeeded, std::vector<WorldEvent>& ev);
  bool subgoal_holds(const SubgoalSpec& g, bool touch_succeeded) const;
  void update_head();

  TaskScenario scenario_;
  std::uint64_t seed_ = 0;
  WorldState state_;
  WholeBodyWeights locked_base_;
  DigestChain chain_;
  std::string digest_hex_;
  bool gripper_moving_ = false;
};

}  // namespace quadassist
