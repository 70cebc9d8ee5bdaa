#include "quadassist/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "quadassist/errors.hpp"
#include "quadassist/voice.hpp"

namespace quadassist {

namespace {

nlohmann::json vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

nlohmann::json arm_json(const ArmVector& q) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < kArmJoints; ++i) out.push_back(q[i]);
  return out;
}

Eigen::Isometry3d pose_of(const EEPose& p) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = p.orientation.toRotationMatrix();
  t.translation() = p.position;
  return t;
}

double yaw_of(const Eigen::Isometry3d& t) {
  return std::atan2(t.linear()(1, 0), t.linear()(0, 0));
}

void put_matrix(ByteWriter& w, const Eigen::Isometry3d& t) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) w.put(t.matrix()(r, c));
  }
}

void put_frame(ByteWriter& w, const QuadstickFrame& f) {
  w.put(f.joystick_h);
  w.put(f.joystick_v);
  for (auto c : f.channels) w.put(static_cast<std::int64_t>(c));
  w.put(f.push_button);
}

bool same_input(const QuadstickFrame& a, const QuadstickFrame& b) {
  return a.joystick_h == b.joystick_h && a.joystick_v == b.joystick_v &&
         a.channels == b.channels && a.push_button == b.push_button;
}

nlohmann::json mapping_json(const MappingModeState& m) {
  return {{"current", to_string(m.current)},
          {"pending", m.pending ? nlohmann::json(to_string(*m.pending)) : nlohmann::json()},
          {"started_at", m.transition_started_at ? nlohmann::json(*m.transition_started_at)
                                                 : nlohmann::json()}};
}

constexpr double kSlipDistance = 0.1;  // a grabbed handle further than this is let go
constexpr int kReachIterations = 200;

}  // namespace

std::string_view to_string(Activity a) noexcept {
  switch (a) {
    case Activity::Idle:
      return "idle";
    case Activity::Locomotion:
      return "locomotion";
    case Activity::Manipulation:
      return "manipulation";
  }
  return "?";
}

struct SimWorld::Latches {
  bool stop = false;
  std::optional<std::string> abort;
};

SimWorld::SimWorld(TaskScenario scenario, std::optional<std::uint64_t> seed)
    : scenario_(std::move(scenario)), seed_(seed.value_or(scenario_.seed)) {
  const auto& cfg = scenario_.config;
  state_.base.x = scenario_.initial_robot.base_x;
  state_.base.y = scenario_.initial_robot.base_y;
  state_.base.yaw = scenario_.initial_robot.base_yaw;
  state_.arm_q = scenario_.initial_robot.arm_q;
  state_.gripper_width = cfg.gripper.max_width;
  state_.gripper_target = cfg.gripper.max_width;
  state_.face_touch = FaceTouchPipeline(cfg.safety.face_touch);
  state_.rng = DeterministicRng(seed_);
  state_.head = scenario_.head;

  locked_base_ = cfg.kinematics.weights;
  for (int i = 0; i < kBaseDofs; ++i) {
    locked_base_.penalty[i] = std::numeric_limits<double>::infinity();
  }

  for (const auto& o : scenario_.objects) {
    ObjectState s;
    if (o.is_articulation()) {
      s.value = o.initial;
    } else {
      s.pose.translation() = o.position;
      s.pose.linear() = Eigen::AngleAxisd(o.yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
      s.mounted = o.mount.has_value();
    }
    state_.objects.push_back(s);
    state_.mount_origin.push_back(s.pose);
  }
  for (const auto& t : scenario_.tasks) {
    state_.subgoals.emplace_back(t.subgoals.size());
    state_.task_done_tick.push_back(-1);
  }
  update_head();
}

// --- geometry helpers ------------------------------------------------------

EEPose SimWorld::ee_pose() const { return forward_kinematics(state_.robot(), scenario_.robot_model); }

Eigen::Isometry3d SimWorld::articulation_transform(int index, double value) const {
  const auto& o = scenario_.objects.at(index);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (o.kind == ObjectKind::Revolute) {
    t.translate(o.origin);
    t.rotate(Eigen::AngleAxisd(value - o.initial, o.axis));
    t.translate(-o.origin);
  } else if (o.kind == ObjectKind::Prismatic) {
    t.translate((value - o.initial) * o.axis);
  }
  return t;
}

Eigen::Vector3d SimWorld::handle_position(int index) const {
  const auto& o = scenario_.objects.at(index);
  const double v = state_.objects.at(index).value;
  if (o.kind == ObjectKind::Revolute) {
    return o.origin + Eigen::AngleAxisd(v, o.axis) * o.handle;
  }
  return o.origin + o.handle + v * o.axis;
}

Eigen::Vector3d SimWorld::object_position(int index) const {
  if (scenario_.objects.at(index).is_articulation()) return handle_position(index);
  return state_.objects.at(index).pose.translation();
}

std::vector<Eigen::Vector3d> SimWorld::endpoints_world(int index) const {
  std::vector<Eigen::Vector3d> out;
  for (const auto& e : scenario_.objects.at(index).endpoints) {
    out.push_back(state_.objects.at(index).pose * e);
  }
  return out;
}

bool SimWorld::requirement_met(int index) const {
  const auto& req = scenario_.objects.at(index).requires_open;
  if (!req) return true;
  const int other = scenario_.object_index(req->object);
  return state_.objects.at(other).value >= req->at_least;
}

CameraModel SimWorld::camera_now() const {
  const auto frames = forward_kinematics_frames(state_.robot(), scenario_.robot_model);
  const auto& mount = scenario_.camera;
  Eigen::Isometry3d t = frames.base_frame;
  if (mount.frame == "tool") {
    t = frames.tool_frame;
  } else {
    for (int i = 0; i < kArmJoints; ++i) {
      if (scenario_.robot_model.joints[i].name == mount.frame) t = frames.joint_frames[i];
    }
  }
  CameraModel cam;
  cam.position = t * mount.offset;
  cam.forward = (t.linear() * mount.forward).normalized();
  cam.half_fov = mount.half_fov;
  cam.min_range = mount.min_range;
  cam.max_range = mount.max_range;
  return cam;
}

void SimWorld::update_head() {
  state_.head = scenario_.head;
  const auto& m = scenario_.head_motion;
  if (!m.amplitude.isZero(0.0)) {
    const double phase = 2.0 * std::numbers::pi * state_.sim_time / m.period;
    state_.head.center += m.amplitude * std::sin(phase);
  }
}

// Arm-only position IK from the current configuration; the base stays put.
bool SimWorld::reachable(const Eigen::Vector3d& point) const {
  const auto& model = scenario_.robot_model;
  RobotConfiguration q = state_.robot();
  const double tol = scenario_.config.safety.reach_tolerance;
  for (int it = 0; it < kReachIterations; ++it) {
    const Eigen::Vector3d err = point - forward_kinematics(q, model).position;
    if (err.norm() < tol) {
      return within_limits(q, model) && check_self_collision(q, model).empty();
    }
    const Eigen::Matrix<double, 3, kArmJoints> j =
        jacobian(q, model).topRows<3>().rightCols<kArmJoints>();
    const Eigen::Matrix3d a = j * j.transpose() + 1e-4 * Eigen::Matrix3d::Identity();
    ArmVector dq = j.transpose() * a.ldlt().solve(err);
    const double n = dq.norm();
    if (n > 0.2) dq *= 0.2 / n;
    q.arm_q += dq;
    q = sanitize(q, model);
  }
  return false;
}

// --- controllers -----------------------------------------------------------

void SimWorld::start_homing(ControlMode mode, std::vector<WorldEvent>& ev) {
  const auto target = initial_configuration(mode, state_.robot(), scenario_.config.router);
  state_.homing = true;
  state_.homing_target = target.arm_q;
  state_.homing_stall = 0;
  state_.session_anchor = Eigen::Vector2d(state_.base.x, state_.base.y);
  ev.push_back({"homing", {{"state", "started"}, {"mode", to_string(mode)},
                           {"target", arm_json(target.arm_q)}}});
}

// One rate-limited joint-space step toward target. Returns true once there.
bool SimWorld::homing_step(const ArmVector& target, std::vector<WorldEvent>& ev,
                           const char* purpose) {
  const auto& kc = scenario_.config.kinematics;
  const double dt = scenario_.dt;
  if ((target - state_.arm_q).cwiseAbs().maxCoeff() <= kc.homing_tolerance) {
    state_.arm_q = target;
    return true;
  }
  Vector9 rates = Vector9::Zero();
  rates.tail<kArmJoints>() =
      ((target - state_.arm_q) / dt).cwiseMax(-kc.homing_rate).cwiseMin(kc.homing_rate);
  rates = project_rates(state_.robot(), rates, scenario_.robot_model, kc.projection);
  if (rates.tail<kArmJoints>().isZero(0.0)) {
    if (++state_.homing_stall == kc.homing_stall_ticks) {
      ev.push_back({"homing", {{"state", "blocked"}, {"purpose", purpose}}});
    }
    return false;
  }
  state_.homing_stall = 0;
  state_.arm_q = integrate_rates(state_.robot(), rates, dt, scenario_.robot_model).arm_q;
  if ((target - state_.arm_q).cwiseAbs().maxCoeff() <= kc.homing_tolerance) {
    state_.arm_q = target;
    return true;
  }
  return false;
}

Vector9 SimWorld::cartesian_rates(const Eigen::Vector3d& velocity, bool retracting) const {
  if (velocity.isZero(0.0)) return Vector9::Zero();
  const auto& model = scenario_.robot_model;
  const auto& proj = scenario_.config.kinematics.projection;
  const RobotConfiguration q = state_.robot();
  Twist twist = Twist::Zero();
  twist.head<3>() = velocity;
  Vector9 rates = solve_whole_body_rates(q, twist, locked_base_, model, proj);

  const auto& plan = state_.face_touch.plan();
  if (!retracting || !plan) return rates;
  // Retraction must never bring the tool closer to the face along the approach axis.
  const Eigen::Vector3d& axis = plan->axis;
  const double now = (forward_kinematics(q, model).position - plan->mouth).dot(axis);
  auto advances = [&](const Vector9& r) {
    const auto next = integrate_rates(q, r, scenario_.dt, model);
    return (forward_kinematics(next, model).position - plan->mouth).dot(axis) < now;
  };
  if (!advances(rates)) return rates;
  Vector9 g = jacobian(q, model).topRows<3>().transpose() * axis;
  g.head<kBaseDofs>().setZero();
  const double gg = g.squaredNorm();
  if (gg > 0.0) {
    const double c = g.dot(rates);
    if (c < 0.0) rates -= (c / gg) * g;
    rates = project_rates(q, rates, model, proj);
    if (!advances(rates)) return rates;
  }
  return Vector9::Zero();
}

// --- gripper and objects ---------------------------------------------------

void SimWorld::update_gripper(GripperAction action, std::vector<WorldEvent>& ev) {
  const auto& gc = scenario_.config.gripper;
  const Eigen::Vector3d tool = ee_pose().position;
  if (action == GripperAction::Open) {
    if (state_.held_object >= 0) {
      const int i = state_.held_object;
      ev.push_back({"gripper", {{"action", "release"},
                                {"object", scenario_.objects[i].name},
                                {"position", vec(object_position(i))}}});
      state_.held_object = -1;
    }
    if (state_.grabbed_articulation >= 0) {
      const int i = state_.grabbed_articulation;
      ev.push_back({"gripper", {{"action", "release"},
                                {"object", scenario_.objects[i].name},
                                {"value", state_.objects[i].value}}});
      state_.grabbed_articulation = -1;
    }
    state_.gripper_target = gc.max_width;
  } else if (action == GripperAction::Close) {
    if (state_.held_object < 0 && state_.grabbed_articulation < 0) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      // Rigid objects first, then articulation handles.
      for (int pass = 0; pass < 2 && best < 0; ++pass) {
        for (int i = 0; i < static_cast<int>(scenario_.objects.size()); ++i) {
          const auto& o = scenario_.objects[i];
          if (o.is_articulation() != (pass == 1)) continue;
          const double d = (object_position(i) - tool).norm();
          if (d > o.grasp_radius || d >= best_d) continue;
          if (state_.gripper_width < o.width || !requirement_met(i)) continue;
          best = i;
          best_d = d;
        }
      }
      if (best >= 0) {
        const auto& o = scenario_.objects[best];
        auto& s = state_.objects[best];
        if (o.is_articulation()) {
          state_.grabbed_articulation = best;
        } else {
          state_.held_object = best;
          state_.held_relative = pose_of(ee_pose()).inverse() * s.pose;
          s.mounted = false;
          s.ever_held = true;
        }
        ev.push_back({"gripper", {{"action", "grasp"},
                                  {"object", o.name},
                                  {"distance", best_d}}});
        state_.gripper_target = o.width;
      } else {
        state_.gripper_target = 0.0;
      }
    }
  }
  const double step = gc.speed * scenario_.dt;
  const double before = state_.gripper_width;
  const double diff = state_.gripper_target - before;
  state_.gripper_width = std::abs(diff) <= step ? state_.gripper_target
                                                : before + std::copysign(step, diff);
  gripper_moving_ = state_.gripper_width != before;
}

void SimWorld::update_objects(std::vector<WorldEvent>& ev) {
  const EEPose ee = ee_pose();
  if (state_.grabbed_articulation >= 0) {
    const int i = state_.grabbed_articulation;
    const auto& o = scenario_.objects[i];
    const Eigen::Vector3d r = ee.position - o.origin;
    double v;
    if (o.kind == ObjectKind::Revolute) {
      const Eigen::Vector3d rp = r - r.dot(o.axis) * o.axis;
      const Eigen::Vector3d hp = o.handle - o.handle.dot(o.axis) * o.axis;
      v = std::atan2(o.axis.dot(hp.cross(rp)), hp.dot(rp));
    } else {
      v = (r - o.handle).dot(o.axis);
    }
    state_.objects[i].value = std::clamp(v, o.lower, o.upper);
    if ((handle_position(i) - ee.position).norm() > kSlipDistance) {
      ev.push_back({"gripper", {{"action", "slip"},
                                {"object", o.name},
                                {"value", state_.objects[i].value}}});
      state_.grabbed_articulation = -1;
      state_.gripper_target = 0.0;
    }
  }
  for (std::size_t i = 0; i < scenario_.objects.size(); ++i) {
    const auto& o = scenario_.objects[i];
    auto& s = state_.objects[i];
    if (s.mounted) {
      const int m = scenario_.object_index(*o.mount);
      s.pose = articulation_transform(m, state_.objects[m].value) * state_.mount_origin[i];
    }
  }
  if (state_.held_object >= 0) {
    state_.objects[state_.held_object].pose = pose_of(ee) * state_.held_relative;
  }
}

void SimWorld::update_wrench(std::vector<WorldEvent>& ev) {
  const Eigen::Vector3d rel = ee_pose().position - state_.head.center;
  const double dist = rel.norm();
  ContactSummary contact;
  contact.penetration = std::max(0.0, state_.head.radius - dist);
  if (dist > 0.0) contact.normal = rel / dist;
  state_.wrench = compute_wrench(contact, scenario_.config.safety.wrench, state_.rng,
                                 state_.sim_time);
  const bool was = state_.collision_active;
  state_.collision_active =
      detect_collision(state_.wrench, was, scenario_.config.safety.face_touch.collision);
  if (state_.collision_active != was) {
    ev.push_back({"collision", {{"active", state_.collision_active},
                                {"force", state_.wrench.force.norm()}}});
  }
}

// --- tasks ----------------------------------------------------------------

bool SimWorld::subgoal_holds(const SubgoalSpec& g, bool touch_succeeded) const {
  const int i = g.object.empty() ? -1 : scenario_.object_index(g.object);
  switch (g.type) {
    case SubgoalType::ArticulationAtLeast:
      return state_.objects[i].value >= g.threshold;
    case SubgoalType::ReleasedInRegion:
      return state_.objects[i].ever_held && state_.held_object != i &&
             scenario_.region(g.region)->contains(object_position(i));
    case SubgoalType::TouchSuccess:
      return touch_succeeded && (i < 0 || state_.held_object == i);
    case SubgoalType::EndpointsInRegion: {
      if (!state_.objects[i].ever_held || state_.held_object == i) return false;
      const Region* r = scenario_.region(g.region);
      for (const auto& p : endpoints_world(i)) {
        if (!r->contains(p)) return false;
      }
      return true;
    }
  }
  return false;
}

void SimWorld::evaluate_tasks(bool touch_succeeded, std::vector<WorldEvent>& ev) {
  for (std::size_t t = 0; t < scenario_.tasks.size(); ++t) {
    const auto& task = scenario_.tasks[t];
    auto& status = state_.subgoals[t];
    for (std::size_t k = 0; k < task.subgoals.size(); ++k) {
      if (status[k].done) continue;
      const auto& g = task.subgoals[k];
      bool ready = true;
      for (const auto& dep : g.after) {
        for (std::size_t d = 0; d < task.subgoals.size(); ++d) {
          if (task.subgoals[d].id == dep && !status[d].done) ready = false;
        }
      }
      if (!ready || !subgoal_holds(g, touch_succeeded)) continue;
      status[k] = {true, state_.tick_index};
      ev.push_back({"subgoal", {{"task", task.name}, {"id", g.id}, {"points", g.points}}});
    }
    if (state_.task_done_tick[t] < 0 && !status.empty() &&
        std::all_of(status.begin(), status.end(), [](const auto& s) { return s.done; })) {
      state_.task_done_tick[t] = state_.tick_index;
      ev.push_back({"task", {{"task", task.name}, {"index", t}}});
    }
  }
}

bool SimWorld::all_tasks_complete() const {
  bool any = false;
  for (const auto& task : state_.subgoals) {
    for (const auto& s : task) {
      if (!s.done) return false;
      any = true;
    }
  }
  return any;
}

bool SimWorld::finished() const {
  return all_tasks_complete() || state_.tick_index >= scenario_.duration_ticks();
}

int SimWorld::points() const {
  int total = 0;
  for (std::size_t t = 0; t < scenario_.tasks.size(); ++t) {
    for (std::size_t k = 0; k < scenario_.tasks[t].subgoals.size(); ++k) {
      if (state_.subgoals[t][k].done) total += scenario_.tasks[t].subgoals[k].points;
    }
  }
  return total;
}

// --- voice ------------------------------------------------------------------

void SimWorld::handle_voice(const std::vector<std::string>& transcripts,
                            std::vector<WorldEvent>& ev, Latches& latch) {
  class Sink : public CommandSink {
   public:
    Sink(WorldState& s, Latches& l) : s_(s), l_(l) {}
    void emergency_stop() override { l_.stop = true; }
    void request_face_touch_abort(std::string_view reason) override {
      l_.abort = std::string(reason);
    }
    bool request_face_touch_start() override {
      if (s_.control.mode == ControlMode::BaseControl) {
        refused_in_base = true;
        return false;
      }
      if (!s_.face_touch.start()) return false;
      s_.face_touch_home = s_.arm_q;
      s_.homing = false;
      return true;
    }
    FaceTouchPhase face_touch_phase() const override { return s_.face_touch.state().phase; }
    bool refused_in_base = false;

   private:
    WorldState& s_;
    Latches& l_;
  };

  for (const auto& text : transcripts) {
    ev.push_back({"transcript", {{"text", text}}});
    const auto cmd = parse_transcript(text, scenario_.config.voice);
    if (!cmd) {
      ev.push_back({"voice", {{"text", text}, {"command", nullptr},
                              {"applied", false}, {"note", "no command matched"}}});
      continue;
    }
    Sink sink(state_, latch);
    auto effect = dispatch(*cmd, sink);
    if (sink.refused_in_base) effect.note = "face touch needs an end-effector mode";
    ev.push_back({"voice", {{"text", text}, {"command", to_string(effect.command)},
                            {"applied", effect.applied}, {"note", effect.note}}});
  }
}

// --- tick -------------------------------------------------------------------

StepResult SimWorld::step(const QuadstickFrame& frame_in,
                          const std::vector<std::string>& transcripts, double dt) {
  if (dt != scenario_.dt) {
    throw ContractError("tick " + std::to_string(state_.tick_index) + ": dt " +
                        std::to_string(dt) + " differs from the scenario dt");
  }
  try {
    const auto& cfg = scenario_.config;
    const auto& model = scenario_.robot_model;
    std::vector<WorldEvent> ev;
    const double now = state_.sim_time;

    QuadstickFrame raw = frame_in;
    raw.timestamp = now;
    if (!same_input(raw, state_.raw_frame)) ev.push_back({"frame", frame_to_json(raw)});
    const QuadstickFrame f = apply_deadzone(raw, cfg.quadstick.deadzone);

    // (1) voice
    Latches latch;
    handle_voice(transcripts, ev, latch);

    // (2) mapping mode
    const auto mapping =
        update_mapping_mode(state_.mapping, f, now, cfg.quadstick.switch_latency);
    if (mapping.current != state_.mapping.current || mapping.pending != state_.mapping.pending) {
      ev.push_back({"mapping_mode", mapping_json(mapping)});
    }
    state_.mapping = mapping;

    // (3) control mode; ignored while the autonomy owns the arm
    if (!is_active(state_.face_touch.state().phase)) {
      const auto next = update_control_mode(state_.control, f, state_.last_frame);
      if (next.mode != state_.control.mode) {
        ev.push_back({"control_mode", {{"from", to_string(state_.control.mode)},
                                       {"to", to_string(next.mode)}}});
        if (state_.control.mode == ControlMode::BaseControl) {
          state_.base.vx = state_.base.vy = state_.base.wyaw = 0.0;
        }
        if (next.mode == ControlMode::BaseControl) {
          if (state_.homing) ev.push_back({"homing", {{"state", "cancelled"}}});
          state_.homing = false;
        } else {
          start_homing(next.mode, ev);
        }
      }
      state_.control = next;
    }
    state_.last_frame = f;
    state_.raw_frame = raw;

    // (4) routing
    RoutedCommand routed = route_frame(f, state_.control.mode, state_.mapping, cfg.router.caps);
    auto zero_motion = [](RoutedCommand& r) {
      if (std::holds_alternative<BaseTwistCommand>(r.motion)) {
        r.motion = BaseTwistCommand{};
      } else {
        r.motion = EETwistCommand{};
      }
    };

    // (5) stop and autonomy overrides
    bool autonomy = is_active(state_.face_touch.state().phase);
    if (latch.stop) {
      state_.stop_latched = true;
      state_.base.vx = state_.base.vy = state_.base.wyaw = 0.0;
      if (state_.homing) ev.push_back({"homing", {{"state", "cancelled"}}});
      state_.homing = false;
      if (autonomy) latch.abort = "stop";
      ev.push_back({"stop", {{"state", "latched"}}});
    }
    if (state_.stop_latched) {
      if (routed.motion_is_zero() && routed.gripper == GripperAction::Hold && !latch.stop) {
        state_.stop_latched = false;
        ev.push_back({"stop", {{"state", "released"}}});
      } else {
        zero_motion(routed);
        routed.gripper = GripperAction::Hold;
      }
    }

    FaceTouchOutput ft;
    bool touch_succeeded = false;
    if (autonomy) {
      zero_motion(routed);
      routed.gripper = GripperAction::Hold;
      FaceTouchInputs in;
      in.now = now;
      in.dt = dt;
      in.collision_event = state_.collision_active;
      in.force_norm = state_.wrench.force.norm();
      in.abort_reason = latch.abort;
      in.ee = ee_pose();
      if (state_.face_touch.wants_target()) {
        in.target = acquire_mouth_target(state_.head, camera_now(),
                                         cfg.safety.face_touch.noise, state_.rng);
        in.reachable = [this](const Eigen::Vector3d& p) { return reachable(p); };
      }
      in.arm_at_home =
          (state_.face_touch_home - state_.arm_q).cwiseAbs().maxCoeff() <=
              cfg.kinematics.homing_tolerance ||
          state_.homing_stall >= cfg.kinematics.homing_stall_ticks;
      ft = state_.face_touch.step(in);
      touch_succeeded = ft.touch_succeeded;
      for (const auto& t : ft.transitions) {
        ev.push_back({"face_touch", {{"from", to_string(t.from)},
                                     {"to", to_string(t.to)},
                                     {"reason", t.reason}}});
      }
      if (!is_active(ft.state.phase)) state_.homing_stall = 0;
    }
    state_.routed = routed;

    // (6) controller
    bool base_moving = false;
    bool manipulating = autonomy;
    Vector9 rates = Vector9::Zero();
    if (autonomy) {
      const bool retracting = ft.state.phase == FaceTouchPhase::Retracting;
      switch (ft.command.kind) {
        case FaceTouchCommandKind::Cartesian:
          rates = cartesian_rates(ft.command.linear_velocity, retracting);
          break;
        case FaceTouchCommandKind::HomeArm:
          homing_step(state_.face_touch_home, ev, "face_touch");
          break;
        default:
          break;
      }
    } else if (state_.control.mode == ControlMode::BaseControl) {
      const auto cmd = std::get<BaseTwistCommand>(routed.motion);
      state_.base = step_base(state_.base, cmd, dt, cfg.locomotion);
      base_moving = !cmd.is_zero();
    } else if (state_.homing) {
      manipulating = true;
      if (homing_step(state_.homing_target, ev, "mode")) {
        state_.homing = false;
        ev.push_back({"homing", {{"state", "done"}}});
      } else if (state_.homing_stall >= cfg.kinematics.homing_stall_ticks) {
        state_.homing = false;
        state_.homing_stall = 0;
      }
    } else {
      const auto cmd = std::get<EETwistCommand>(routed.motion);
      if (!(cmd == EETwistCommand{})) {
        manipulating = true;
        const RobotConfiguration q = state_.robot();
        const Twist twist = to_world_twist(cmd, q.base_yaw);
        const auto& kc = cfg.kinematics;
        rates = solve_whole_body_rates(q, twist, kc.weights, model, kc.projection);
        const Eigen::Vector2d next_xy(q.base_x + rates[0] * dt, q.base_y + rates[1] * dt);
        if ((next_xy - state_.session_anchor).norm() > kc.base_assist_cap) {
          rates = solve_whole_body_rates(q, twist, locked_base_, model, kc.projection);
        }
      }
    }
    if (!rates.isZero(0.0)) {
      const auto next = integrate_rates(state_.robot(), rates, dt, model);
      state_.base.x = next.base_x;
      state_.base.y = next.base_y;
      state_.base.yaw = next.base_yaw;
      state_.arm_q = next.arm_q;
    }

    // (7) gripper, articulations, attachments
    update_gripper(routed.gripper, ev);
    if (gripper_moving_ && state_.control.mode != ControlMode::BaseControl) manipulating = true;
    update_objects(ev);

    // (8) wrench
    update_wrench(ev);

    // (9) task predicates
    evaluate_tasks(touch_succeeded, ev);

    // Time accounting.
    const Activity activity = base_moving    ? Activity::Locomotion
                              : manipulating ? Activity::Manipulation
                                             : Activity::Idle;
    if (activity != state_.activity || state_.tick_index == 0) {
      ev.push_back({"activity", {{"activity", to_string(activity)}}});
    }
    state_.activity = activity;
    switch (activity) {
      case Activity::Locomotion:
        ++state_.locomotion_ticks;
        break;
      case Activity::Manipulation:
        ++state_.manipulation_ticks;
        break;
      case Activity::Idle:
        ++state_.idle_ticks;
        break;
    }

    state_.tick_index += 1;
    state_.sim_time = static_cast<double>(state_.tick_index) * dt;
    update_head();

    if (!state_.ended && finished()) {
      state_.ended = true;
      ev.push_back({"end", {{"reason", all_tasks_complete() ? "complete" : "duration"},
                            {"ticks", state_.tick_index},
                            {"points", points()}}});
    }

    // (10) digest chain over state and events
    std::string payload = state_bytes();
    for (const auto& e : ev) {
      payload += e.kind;
      payload += e.payload.dump();
    }
    chain_.advance(payload);
    digest_hex_ = chain_.hex();
    return {std::move(ev), digest_hex_};
  } catch (const ContractError& e) {
    throw ContractError("tick " + std::to_string(state_.tick_index) + ": " + e.what());
  }
}

std::string SimWorld::state_bytes() const {
  ByteWriter w;
  const auto& s = state_;
  w.put(s.tick_index);
  w.put(s.sim_time);
  for (double v : {s.base.x, s.base.y, s.base.yaw, s.base.vx, s.base.vy, s.base.wyaw}) w.put(v);
  for (int i = 0; i < kArmJoints; ++i) w.put(s.arm_q[i]);
  w.put(s.gripper_width);
  w.put(s.gripper_target);
  w.put(static_cast<std::int64_t>(s.held_object));
  w.put(static_cast<std::int64_t>(s.grabbed_articulation));
  put_matrix(w, s.held_relative);
  for (const auto& o : s.objects) {
    put_matrix(w, o.pose);
    w.put(o.value);
    w.put(o.mounted);
    w.put(o.ever_held);
  }
  for (int i = 0; i < 3; ++i) w.put(s.head.center[i]);
  put_frame(w, s.raw_frame);
  w.put(static_cast<std::int64_t>(s.mapping.current));
  w.put(s.mapping.pending.has_value());
  w.put(s.mapping.transition_started_at.value_or(-1.0));
  w.put(static_cast<std::int64_t>(s.control.mode));
  w.put(static_cast<std::int64_t>(s.control.last_ee_mode));
  w.put(s.homing);
  w.put(static_cast<std::int64_t>(s.homing_stall));
  for (int i = 0; i < 2; ++i) w.put(s.session_anchor[i]);
  for (double v : s.face_touch.digest_values()) w.put(v);
  for (int i = 0; i < kArmJoints; ++i) w.put(s.face_touch_home[i]);
  w.put(s.stop_latched);
  for (int i = 0; i < 3; ++i) w.put(s.wrench.force[i]);
  w.put(s.collision_active);
  for (const auto& task : s.subgoals) {
    for (const auto& g : task) w.put(g.tick);
  }
  w.put(static_cast<std::int64_t>(s.activity));
  w.put(s.locomotion_ticks);
  w.put(s.manipulation_ticks);
  w.put(s.idle_ticks);
  w.put(static_cast<std::int64_t>(s.rng.draws()));
  return w.bytes();
}

nlohmann::json SimWorld::snapshot() const {
  const auto& s = state_;
  const EEPose ee = ee_pose();
  nlohmann::json objects = nlohmann::json::array();
  for (std::size_t i = 0; i < scenario_.objects.size(); ++i) {
    const auto& o = scenario_.objects[i];
    nlohmann::json jo{{"name", o.name}, {"kind", to_string(o.kind)}};
    if (o.is_articulation()) {
      jo["value"] = s.objects[i].value;
      jo["handle"] = vec(handle_position(static_cast<int>(i)));
    } else {
      jo["position"] = vec(s.objects[i].pose.translation());
      jo["yaw"] = yaw_of(s.objects[i].pose);
      jo["held"] = s.held_object == static_cast<int>(i);
    }
    objects.push_back(jo);
  }
  nlohmann::json subgoals = nlohmann::json::array();
  for (std::size_t t = 0; t < scenario_.tasks.size(); ++t) {
    for (std::size_t k = 0; k < scenario_.tasks[t].subgoals.size(); ++k) {
      subgoals.push_back({{"task", scenario_.tasks[t].name},
                          {"id", scenario_.tasks[t].subgoals[k].id},
                          {"done", s.subgoals[t][k].done}});
    }
  }
  const double dt = scenario_.dt;
  const auto& q = ee.orientation;
  return {
      {"tick", s.tick_index},
      {"t", s.sim_time},
      {"base", {{"x", s.base.x}, {"y", s.base.y}, {"yaw", s.base.yaw},
                {"vx", s.base.vx}, {"vy", s.base.vy}, {"wyaw", s.base.wyaw}}},
      {"arm_q", arm_json(s.arm_q)},
      {"ee", {{"position", vec(ee.position)}, {"orientation", {q.w(), q.x(), q.y(), q.z()}}}},
      {"control_mode", to_string(s.control.mode)},
      {"last_ee_mode", to_string(s.control.last_ee_mode)},
      {"mapping", mapping_json(s.mapping)},
      {"gripper", {{"width", s.gripper_width},
                   {"held", s.held_object >= 0 ? nlohmann::json(scenario_.objects[s.held_object].name)
                                               : nlohmann::json()},
                   {"grabbed", s.grabbed_articulation >= 0
                                   ? nlohmann::json(scenario_.objects[s.grabbed_articulation].name)
                                   : nlohmann::json()}}},
      {"objects", objects},
      {"head", {{"center", vec(s.head.center)}, {"facing", vec(s.head.facing)},
                {"radius", s.head.radius}, {"mouth", vec(s.head.mouth())}}},
      {"face_touch", {{"phase", to_string(s.face_touch.state().phase)},
                      {"reason", s.face_touch.state().reason}}},
      {"wrench", {{"force", vec(s.wrench.force)}, {"norm", s.wrench.force.norm()}}},
      {"collision", s.collision_active},
      {"stop_latched", s.stop_latched},
      {"homing", s.homing},
      {"subgoals", subgoals},
      {"activity", to_string(s.activity)},
      {"times", {{"locomotion", static_cast<double>(s.locomotion_ticks) * dt},
                 {"manipulation", static_cast<double>(s.manipulation_ticks) * dt},
                 {"idle", static_cast<double>(s.idle_ticks) * dt}}},
      {"points", points()},
      {"max_points", scenario_.max_points()},
      {"digest", digest_hex_},
  };
}

}  // namespace quadassist
