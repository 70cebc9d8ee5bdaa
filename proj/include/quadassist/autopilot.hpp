#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "quadassist/quadstick.hpp"
#include "quadassist/scenario.hpp"
#include "quadassist/session.hpp"
#include "quadassist/world.hpp"

namespace quadassist {

struct PilotAction {
  QuadstickFrame frame;
  std::vector<std::string> transcripts;
};

/// Scripted pilot: reads the world and answers with Quadstick frames and
/// spoken commands, like a pilot watching the robot. It only ever drives the
/// robot through the same inputs a human has.
///
/// Assumes the track layout of the bundled scenarios: work surfaces lie in
/// +x of the base, stations are reached by driving without turning.
class Autopilot {
 public:
  explicit Autopilot(const TaskScenario& scenario);

  PilotAction next(const SimWorld& world);

  bool finished() const noexcept { return finished_; }
  bool failed() const noexcept { return !failure_.empty(); }
  const std::string& failure() const noexcept { return failure_; }
  std::string current_step() const;

 private:
  using StepFn = std::function<bool(const SimWorld&, PilotAction&)>;
  struct Step {
    std::string name;
    StepFn run;
    int timeout_ticks = 3000;
    int elapsed = 0;
  };
  struct Target {
    int task = -1;
    int subgoal = -1;
  };

  void plan_next(const SimWorld& world);
  void plan_subgoal(const SimWorld& world, const SubgoalSpec& goal);
  void plan_articulation(const SimWorld& world, int object, double value);
  void plan_grasp(const SimWorld& world, int object);
  void plan_carry(int object, const Eigen::Vector3d& object_target);
  void plan_release();
  void plan_station(const std::vector<Eigen::Vector3d>& points);
  void push(std::string name, StepFn fn, int timeout_ticks = 3000);

  // Low-level controls; each writes into the frame and reports completion.
  bool ensure_mode(const SimWorld& w, ControlMode mode, QuadstickFrame& f);
  bool servo_ee(const SimWorld& w, const Eigen::Vector3d& target, double tol, QuadstickFrame& f);
  bool drive_base(const SimWorld& w, double x, double y, QuadstickFrame& f);
  void set_axes(double u_h, double u_v, QuadstickFrame& f) const;
  double precompensate(double u) const;

  const TaskScenario& scenario_;
  std::deque<Step> steps_;
  std::optional<Target> target_;
  int attempts_ = 0;
  QuadstickFrame last_;
  bool finished_ = false;
  std::string failure_;
};

/// Runs the autopilot against a fresh world and records its inputs.
PilotScript generate_pilot_script(const TaskScenario& scenario,
                                  std::optional<std::uint64_t> seed = std::nullopt,
                                  std::string* failure = nullptr);

}  // namespace quadassist
