#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "quadassist/kinematics.hpp"
#include "quadassist/rng.hpp"

namespace quadassist {

// --- Wrist force-torque sensor -------------------------------------------

struct WrenchReading {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
  double timestamp = 0.0;
};

/// What the world reports about the tool tip against the environment.
struct ContactSummary {
  double penetration = 0.0;                          // >= 0
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // pushes the tool out
  Eigen::Vector3d lever = Eigen::Vector3d::Zero();    // sensor -> contact point
};

struct WrenchModel {
  double stiffness = 5000.0;   // N/m
  double noise_sigma = 0.0;    // N, per axis, only while in contact
};

WrenchReading compute_wrench(const ContactSummary& contact, const WrenchModel& model,
                             DeterministicRng& rng, double timestamp);

struct CollisionThresholds {
  double threshold = 10.0;        // N
  double release_fraction = 0.8;  // in (0, 1)

  void validate() const;
};

/// Hysteresis: asserts at |F| >= threshold, releases below release_fraction * threshold.
bool detect_collision(const WrenchReading& wrench, bool was_active,
                      const CollisionThresholds& thresholds);

// --- Face target acquisition ----------------------------------------------

struct HeadPose {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d facing = Eigen::Vector3d::UnitX();  // unit, out of the face
  double radius = 0.09;

  Eigen::Vector3d mouth() const { return center + facing.normalized() * radius; }
};

struct CameraModel {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d forward = Eigen::Vector3d::UnitX();
  double half_fov = 0.75;  // rad
  double min_range = 0.1;
  double max_range = 2.5;
};

struct FaceTarget {
  Eigen::Vector3d mouth_position = Eigen::Vector3d::Zero();
  double confidence = 0.0;
  double measured_distance = 0.0;
};

struct AcquisitionNoise {
  double position_sigma = 0.005;  // m
  double confidence_range = 2.0;  // m; confidence e-folding distance
  double min_confidence = 0.2;
};

/// Ground-truth mouth plus seeded Gaussian noise. Empty if the mouth is
/// outside the camera frustum or confidence is too low.
std::optional<FaceTarget> acquire_mouth_target(const HeadPose& head, const CameraModel& camera,
                                               const AcquisitionNoise& noise,
                                               DeterministicRng& rng);
std::optional<FaceTarget> acquire_mouth_target(const HeadPose& head, const CameraModel& camera,
                                               const AcquisitionNoise& noise,
                                               std::uint64_t seed);

// --- Approach planning -------------------------------------------------------

struct ApproachWaypoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double speed = 0.0;   // m/s cap while heading to this waypoint
  int pause_ticks = 0;  // hold after arrival
};

struct ApproachPlan {
  std::vector<ApproachWaypoint> waypoints;
  Eigen::Vector3d mouth = Eigen::Vector3d::Zero();
  /// Unit vector from the mouth toward the start pose (away from the face).
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d standoff_point = Eigen::Vector3d::Zero();
  Eigen::Vector3d contact_point = Eigen::Vector3d::Zero();
};

struct ApproachConfig {
  double standoff = 0.10;
  double transit_speed = 0.10;
  double approach_speed = 0.02;
  double overshoot = 0.01;  // contact point lies this far past the estimated mouth
  int pause_ticks = 1;
};

using ReachabilityCheck = std::function<bool(const Eigen::Vector3d&)>;

/// Straight-line two-phase plan. Empty when the standoff point fails the
/// reachability check.
std::optional<ApproachPlan> plan_approach(const EEPose& current, const FaceTarget& target,
                                          const ApproachConfig& config,
                                          const ReachabilityCheck& reachable = {});

// --- Face-touch supervisor ---------------------------------------------------

enum class FaceTouchPhase : std::uint8_t {
  Idle,
  Acquiring,
  Approaching,
  Contact,
  Retracting,
  Done,
  Aborted
};

std::string_view to_string(FaceTouchPhase p) noexcept;
bool is_legal_transition(FaceTouchPhase from, FaceTouchPhase to) noexcept;
inline bool is_active(FaceTouchPhase p) noexcept {
  return p != FaceTouchPhase::Idle && p != FaceTouchPhase::Done && p != FaceTouchPhase::Aborted;
}

struct FaceTouchState {
  FaceTouchPhase phase = FaceTouchPhase::Idle;
  std::string reason;  // set with Aborted, and while retracting because of an abort

  bool operator==(const FaceTouchState&) const = default;
};

struct FaceTouchConfig {
  ApproachConfig approach;
  CollisionThresholds collision;
  double retract_speed = 0.15;
  double clear_distance = 0.25;  // retreat this far from the mouth before homing
  double touch_force_min = 2.0;
  double touch_dwell = 0.2;
  double contact_timeout = 2.0;
  double waypoint_tolerance = 5e-4;
  int acquire_retries = 5;
  AcquisitionNoise noise;
};

enum class FaceTouchCommandKind : std::uint8_t { None, Hold, Cartesian, HomeArm };

struct FaceTouchCommand {
  FaceTouchCommandKind kind = FaceTouchCommandKind::None;
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();  // world frame
};

struct FaceTouchInputs {
  double now = 0.0;
  double dt = 0.01;
  bool collision_event = false;
  double force_norm = 0.0;
  std::optional<std::string> abort_reason;  // latched voice/UI abort
  EEPose ee;
  /// Result of this tick's acquisition attempt (only used while Acquiring).
  std::optional<FaceTarget> target;
  ReachabilityCheck reachable;
  bool arm_at_home = false;
};

struct FaceTouchTransition {
  FaceTouchPhase from;
  FaceTouchPhase to;
  std::string reason;
};

struct FaceTouchOutput {
  FaceTouchState state;
  FaceTouchCommand command;
  std::vector<FaceTouchTransition> transitions;
  bool touch_succeeded = false;  // set on the tick success latches
};

/// Supervised approach / contact / retraction state machine.
class FaceTouchPipeline {
 public:
  explicit FaceTouchPipeline(FaceTouchConfig config = {}) : config_(std::move(config)) {}

  /// Idle, Done or Aborted -> Acquiring. Returns false (no change) otherwise.
  bool start();
  FaceTouchOutput step(const FaceTouchInputs& in);

  const FaceTouchState& state() const noexcept { return state_; }
  const FaceTouchConfig& config() const noexcept { return config_; }
  const std::optional<ApproachPlan>& plan() const noexcept { return plan_; }
  const std::vector<Eigen::Vector3d>& recorded_path() const noexcept { return recorded_; }
  bool wants_target() const noexcept { return state_.phase == FaceTouchPhase::Acquiring; }
  bool touch_success() const noexcept { return touch_success_; }

  /// Deterministic summary of internal state, for digests.
  std::vector<double> digest_values() const;

 private:
  enum class RetractStage : std::uint8_t { Retrace, Retreat, Home };

  void transition(FaceTouchPhase to, std::string reason, FaceTouchOutput& out);
  FaceTouchCommand move_toward(const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                               double speed, double dt) const;
  void begin_retract(std::string abort_reason, FaceTouchOutput& out);
  FaceTouchCommand retract_step(const FaceTouchInputs& in, FaceTouchOutput& out);

  FaceTouchConfig config_;
  FaceTouchState state_;
  std::optional<ApproachPlan> plan_;
  std::size_t waypoint_ = 0;
  int pause_left_ = 0;
  bool recording_ = false;
  std::vector<Eigen::Vector3d> recorded_;
  std::size_t retrace_index_ = 0;
  RetractStage retract_stage_ = RetractStage::Retrace;
  std::string pending_abort_;
  int acquire_attempts_ = 0;
  double dwell_ = 0.0;
  double contact_time_ = 0.0;
  bool touch_success_ = false;
};

}  // namespace quadassist
