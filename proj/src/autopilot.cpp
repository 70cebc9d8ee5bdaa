#include "quadassist/autopilot.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "quadassist/errors.hpp"

namespace quadassist {

namespace {

constexpr double kStationReach = 0.85;    // preferred x distance from base to the work
constexpr double kStationSlack = 0.12;    // skip driving when already this close
constexpr double kEeGain = 3.0;           // 1/s
constexpr double kBaseGain = 1.0;         // 1/s
constexpr double kZBand = 0.0025;         // m
constexpr double kPreGrasp = 0.08;        // m behind the grasp point
constexpr double kRevoluteMargin = 8.0 * std::numbers::pi / 180.0;
constexpr double kPrismaticMargin = 0.05;
constexpr double kFaceStart = 0.22;       // m in front of the mouth
constexpr int kMaxAttempts = 3;

Eigen::Vector3d handle_at(const ObjectSpec& o, double value) {
  if (o.kind == ObjectKind::Revolute) return o.origin + Eigen::AngleAxisd(value, o.axis) * o.handle;
  return o.origin + o.handle + value * o.axis;
}

bool same_input(const QuadstickFrame& a, const QuadstickFrame& b) {
  return a.joystick_h == b.joystick_h && a.joystick_v == b.joystick_v &&
         a.channels == b.channels && a.push_button == b.push_button;
}

Eigen::Vector2d to_body(const Eigen::Vector2d& world, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * world.x() + s * world.y(), -s * world.x() + c * world.y()};
}

}  // namespace

Autopilot::Autopilot(const TaskScenario& scenario) : scenario_(scenario) {}

std::string Autopilot::current_step() const {
  if (!failure_.empty()) return "failed: " + failure_;
  if (finished_) return "finished";
  return steps_.empty() ? "planning" : steps_.front().name;
}

void Autopilot::push(std::string name, StepFn fn, int timeout_ticks) {
  steps_.push_back({std::move(name), std::move(fn), timeout_ticks, 0});
}

PilotAction Autopilot::next(const SimWorld& world) {
  PilotAction action;
  if (finished_ || failed()) {
    last_ = action.frame;
    return action;
  }
  for (int guard = 0; guard < 8; ++guard) {
    if (steps_.empty()) plan_next(world);
    if (finished_ || failed() || steps_.empty()) break;
    auto& step = steps_.front();
    action = PilotAction{};
    const bool done = step.run(world, action);
    if (!done) {
      if (++step.elapsed > step.timeout_ticks) {
        failure_ = "step '" + step.name + "' timed out at tick " +
                   std::to_string(world.state().tick_index);
        action = PilotAction{};
      }
      break;
    }
    steps_.pop_front();
    // A finished step hands the tick to the next one only if it sent nothing.
    if (!same_input(action.frame, QuadstickFrame{}) || !action.transcripts.empty()) break;
  }
  last_ = action.frame;
  return action;
}

void Autopilot::plan_next(const SimWorld& world) {
  const auto& status = world.state().subgoals;
  if (target_) {
    if (status[target_->task][target_->subgoal].done) {
      target_.reset();
      attempts_ = 0;
    } else if (++attempts_ >= kMaxAttempts + 4) {
      const auto& g = scenario_.tasks[target_->task].subgoals[target_->subgoal];
      failure_ = "subgoal '" + g.id + "' not reached after repeated attempts";
      return;
    }
  }
  if (!target_) {
    for (std::size_t t = 0; t < scenario_.tasks.size() && !target_; ++t) {
      const auto& task = scenario_.tasks[t];
      for (std::size_t k = 0; k < task.subgoals.size(); ++k) {
        if (status[t][k].done) continue;
        target_ = Target{static_cast<int>(t), static_cast<int>(k)};
        break;
      }
    }
    if (!target_) {
      finished_ = true;
      return;
    }
  }
  plan_subgoal(world, scenario_.tasks[target_->task].subgoals[target_->subgoal]);
}

void Autopilot::plan_subgoal(const SimWorld& world, const SubgoalSpec& goal) {
  const int obj = goal.object.empty() ? -1 : scenario_.object_index(goal.object);
  const auto& state = world.state();

  // Prerequisite articulations are opened first, one per planning round.
  if (obj >= 0) {
    int blocked = obj;
    while (blocked >= 0 && !world.requirement_met(blocked)) {
      const int dep = scenario_.object_index(scenario_.objects[blocked].requires_open->object);
      if (world.requirement_met(dep)) {
        const auto& req = *scenario_.objects[blocked].requires_open;
        const auto& d = scenario_.objects[dep];
        const double margin =
            d.kind == ObjectKind::Revolute ? kRevoluteMargin : kPrismaticMargin;
        plan_articulation(world, dep, std::min(req.at_least + margin, d.upper));
        return;
      }
      blocked = dep;
    }
  }

  switch (goal.type) {
    case SubgoalType::ArticulationAtLeast: {
      const auto& o = scenario_.objects[obj];
      const double margin = o.kind == ObjectKind::Revolute ? kRevoluteMargin : kPrismaticMargin;
      plan_articulation(world, obj, std::min(goal.threshold + margin, o.upper));
      break;
    }
    case SubgoalType::ReleasedInRegion: {
      const Region* r = scenario_.region(goal.region);
      const Eigen::Vector3d centre = 0.5 * (r->min + r->max);
      plan_station({world.object_position(obj), centre});
      if (state.held_object != obj) plan_grasp(world, obj);
      plan_carry(obj, centre);
      plan_release();
      break;
    }
    case SubgoalType::EndpointsInRegion: {
      const Region* r = scenario_.region(goal.region);
      const Eigen::Vector3d centre = 0.5 * (r->min + r->max);
      Eigen::Vector3d offset = Eigen::Vector3d::Zero();
      const auto ends = world.endpoints_world(obj);
      for (const auto& e : ends) offset += e - world.object_position(obj);
      offset /= static_cast<double>(ends.size());
      plan_station({world.object_position(obj), centre});
      if (state.held_object != obj) plan_grasp(world, obj);
      plan_carry(obj, centre - offset);
      plan_release();
      break;
    }
    case SubgoalType::TouchSuccess: {
      std::vector<Eigen::Vector3d> points{state.head.mouth()};
      if (obj >= 0) points.push_back(world.object_position(obj));
      plan_station(points);
      if (obj >= 0 && state.held_object != obj) plan_grasp(world, obj);
      push("face start pose", [this](const SimWorld& w, PilotAction& a) {
        const auto& head = w.state().head;
        return servo_ee(w, head.mouth() + head.facing.normalized() * kFaceStart, 0.01, a.frame);
      });
      push("say start", [](const SimWorld&, PilotAction& a) {
        a.transcripts.push_back("start brushing");
        return true;
      });
      push("wait face touch", [](const SimWorld& w, PilotAction&) {
        return !is_active(w.state().face_touch.state().phase);
      }, 6000);
      break;
    }
  }
}

void Autopilot::plan_station(const std::vector<Eigen::Vector3d>& points) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  const double x = c.x() - kStationReach;
  const double y = c.y();
  push("station", [this, x, y](const SimWorld& w, PilotAction& a) {
    const auto& b = w.state().base;
    if (std::hypot(b.x - x, b.y - y) < kStationSlack && w.state().control.mode != ControlMode::BaseControl) {
      return true;
    }
    return drive_base(w, x, y, a.frame);
  });
}

void Autopilot::plan_grasp(const SimWorld& world, int object) {
  (void)world;
  const bool articulation = scenario_.objects[object].is_articulation();
  push("open gripper", [this](const SimWorld& w, PilotAction& a) {
    if (!ensure_mode(w, ControlMode::EEFront, a.frame)) return false;
    const auto& s = w.state();
    if (s.held_object < 0 && s.grabbed_articulation < 0 &&
        s.gripper_width >= scenario_.config.gripper.max_width) {
      return true;
    }
    a.frame.channels[kGripperChannel] = BreathState::Blow;
    return false;
  });
  push("pre-grasp", [this, object](const SimWorld& w, PilotAction& a) {
    const Eigen::Vector3d p = w.object_position(object);
    const double yaw = w.state().base.yaw;
    const Eigen::Vector3d back(std::cos(yaw), std::sin(yaw), 0.0);
    return servo_ee(w, p - kPreGrasp * back, 0.01, a.frame);
  });
  push("reach", [this, object](const SimWorld& w, PilotAction& a) {
    return servo_ee(w, w.object_position(object), 0.004, a.frame);
  });
  push("close gripper", [object, articulation](const SimWorld& w, PilotAction& a) {
    const auto& s = w.state();
    if ((articulation ? s.grabbed_articulation : s.held_object) == object) return true;
    a.frame.channels[kGripperChannel] = BreathState::Suck;
    return false;
  }, 100);
}

void Autopilot::plan_articulation(const SimWorld& world, int object, double value) {
  const auto& o = scenario_.objects[object];
  plan_station({handle_at(o, world.state().objects[object].value), handle_at(o, value)});
  if (world.state().grabbed_articulation != object) plan_grasp(world, object);
  const double stride = o.kind == ObjectKind::Revolute ? 0.1 : 0.03;
  push("pull " + o.name, [this, object, value, stride](const SimWorld& w, PilotAction& a) {
    const auto& spec = scenario_.objects[object];
    const double now = w.state().objects[object].value;
    if (now >= value - 1e-3) return true;
    if (w.state().grabbed_articulation != object) return true;  // slipped; replanned later
    const double ahead = std::min(now + stride, value + 0.25 * stride);
    servo_ee(w, handle_at(spec, ahead), 0.002, a.frame);
    return false;
  });
  plan_release();
}

void Autopilot::plan_carry(int object, const Eigen::Vector3d& object_target) {
  push("carry " + scenario_.objects[object].name,
       [this, object, object_target](const SimWorld& w, PilotAction& a) {
         if (w.state().held_object != object) return true;  // dropped; replanned later
         const Eigen::Vector3d ee = w.ee_pose().position;
         const Eigen::Vector3d grip = w.object_position(object) - ee;
         return servo_ee(w, object_target - grip, 0.008, a.frame);
       });
}

void Autopilot::plan_release() {
  push("release", [](const SimWorld& w, PilotAction& a) {
    const auto& s = w.state();
    if (s.held_object < 0 && s.grabbed_articulation < 0) return true;
    a.frame.channels[kGripperChannel] = BreathState::Blow;
    return false;
  }, 100);
  auto retreat = std::make_shared<std::optional<Eigen::Vector3d>>();
  push("retreat", [this, retreat](const SimWorld& w, PilotAction& a) {
    if (!*retreat) {
      const double yaw = w.state().base.yaw;
      *retreat = w.ee_pose().position - kPreGrasp * Eigen::Vector3d(std::cos(yaw), std::sin(yaw), 0.0);
    }
    return servo_ee(w, **retreat, 0.02, a.frame);
  }, 600);
}

// --- controls -------------------------------------------------------------------

double Autopilot::precompensate(double u) const {
  const double dz = scenario_.config.quadstick.deadzone;
  const double mag = std::min(std::abs(u), 1.0);
  if (mag < 1e-3) return 0.0;
  const double raw = dz + (1.0 - dz) * mag;
  return std::copysign(std::min(1.0, std::ceil(raw * 100.0) / 100.0), u);
}

void Autopilot::set_axes(double u_h, double u_v, QuadstickFrame& f) const {
  f.joystick_h = precompensate(u_h);
  f.joystick_v = precompensate(u_v);
}

bool Autopilot::ensure_mode(const SimWorld& w, ControlMode mode, QuadstickFrame& f) {
  const auto& s = w.state();
  if (s.mapping.current != MappingMode::Primary || s.mapping.pending) {
    // Never expected on this track; wait out any pending switch.
    return false;
  }
  if (s.control.mode == mode) return !s.homing;
  if (mode == ControlMode::BaseControl) {
    if (last_.channels[kModeSwitchChannel] != BreathState::Blow) {
      f.channels[kModeSwitchChannel] = BreathState::Blow;
    }
  } else if (s.control.mode == ControlMode::BaseControl) {
    if (last_.channels[kModeSwitchChannel] != BreathState::Suck) {
      f.channels[kModeSwitchChannel] = BreathState::Suck;
    }
  } else if (!last_.push_button) {
    f.push_button = true;
  }
  return false;
}

bool Autopilot::servo_ee(const SimWorld& w, const Eigen::Vector3d& target, double tol,
                         QuadstickFrame& f) {
  if (!ensure_mode(w, ControlMode::EEFront, f)) return false;
  const Eigen::Vector3d err = target - w.ee_pose().position;
  const Eigen::Vector2d body = to_body(err.head<2>(), w.state().base.yaw);
  if (body.norm() < tol && std::abs(err.z()) < std::max(tol, kZBand)) return true;
  const double cap = scenario_.config.router.caps.ee_linear;
  Eigen::Vector2d v = kEeGain * body;
  if (v.norm() > cap) v *= cap / v.norm();
  set_axes(v.x() / cap, v.y() / cap, f);
  const double band = std::min(std::max(tol, 0.002), kZBand);
  if (err.z() > band) f.channels[kThirdAxisChannel] = BreathState::Blow;
  if (err.z() < -band) f.channels[kThirdAxisChannel] = BreathState::Suck;
  return false;
}

bool Autopilot::drive_base(const SimWorld& w, double x, double y, QuadstickFrame& f) {
  if (!ensure_mode(w, ControlMode::BaseControl, f)) return false;
  const auto& b = w.state().base;
  const Eigen::Vector2d err(x - b.x, y - b.y);
  const double speed = std::hypot(b.vx, b.vy);
  if (err.norm() < 0.02 && speed < 0.02 && std::abs(b.yaw) < 0.03) return true;
  const auto& caps = scenario_.config.router.caps;
  Eigen::Vector2d v = kBaseGain * to_body(err, b.yaw);
  const double cap = std::min(caps.base_vx, caps.base_vy);
  if (v.norm() > cap) v *= cap / v.norm();
  if (err.norm() >= 0.01) set_axes(v.x() / caps.base_vx, v.y() / caps.base_vy, f);
  if (b.yaw > 0.02) f.channels[kThirdAxisChannel] = BreathState::Suck;
  if (b.yaw < -0.02) f.channels[kThirdAxisChannel] = BreathState::Blow;
  return false;
}

PilotScript generate_pilot_script(const TaskScenario& scenario,
                                  std::optional<std::uint64_t> seed, std::string* failure) {
  SimWorld world(scenario, seed);
  Autopilot pilot(scenario);
  PilotScript script;
  QuadstickFrame recorded;
  while (!world.finished()) {
    auto action = pilot.next(world);
    if (pilot.failed()) break;
    const double t = static_cast<double>(world.state().tick_index) * scenario.dt;
    if (!same_input(action.frame, recorded)) {
      recorded = action.frame;
      ScriptEntry e;
      e.t = t;
      e.frame = action.frame;
      e.frame->timestamp = t;
      script.entries.push_back(e);
    }
    for (const auto& text : action.transcripts) {
      ScriptEntry e;
      e.t = t;
      e.transcript = text;
      script.entries.push_back(e);
    }
    world.step(action.frame, action.transcripts);
    if (pilot.finished() && !world.finished()) break;
  }
  if (failure) *failure = pilot.failed() ? pilot.failure() : std::string();
  return script;
}

}  // namespace quadassist
