#include "quadassist/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "quadassist/digest.hpp"
#include "quadassist/errors.hpp"

namespace quadassist {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Field-path aware accessors; every error message starts with the path.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const nlohmann::json& json() const { return j_; }
  const std::string& path() const { return path_; }
  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ScenarioError(join(field) + ": " + what);
  }

  Reader child(const char* key) const {
    if (!has(key)) fail(key, "missing");
    return Reader(j_.at(key), join(key));
  }
  Reader at(std::size_t i) const {
    return Reader(j_.at(i), path_ + "[" + std::to_string(i) + "]");
  }

  double number(const char* key) const {
    if (!has(key)) fail(key, "missing");
    return number_at(key);
  }
  double number(const char* key, double fallback) const {
    return has(key) ? number_at(key) : fallback;
  }
  double positive(const char* key, double fallback) const {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }
  double non_negative(const char* key, double fallback) const {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) fail(key, "must be non-negative");
    return v;
  }
  std::string string(const char* key) const {
    if (!has(key)) fail(key, "missing");
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    return j_.at(key).get<std::string>();
  }
  std::string string(const char* key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }
  Eigen::Vector3d vec3(const char* key) const {
    if (!has(key)) fail(key, "missing");
    return vec3_at(key);
  }
  Eigen::Vector3d vec3(const char* key, const Eigen::Vector3d& fallback) const {
    return has(key) ? vec3_at(key) : fallback;
  }
  std::vector<double> numbers(const char* key, std::size_t count) const {
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != count) {
      fail(key, "expected " + std::to_string(count) + " numbers");
    }
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(key, "expected numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  const nlohmann::json& array(const char* key) const {
    if (!has(key)) fail(key, "missing");
    if (!j_.at(key).is_array()) fail(key, "expected an array");
    return j_.at(key);
  }

 private:
  std::string join(const std::string& field) const {
    return path_.empty() ? field : path_ + "." + field;
  }
  double number_at(const char* key) const {
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
  }
  Eigen::Vector3d vec3_at(const char* key) const {
    const auto n = numbers(key, 3);
    return {n[0], n[1], n[2]};
  }

  const nlohmann::json& j_;
  std::string path_;
};

nlohmann::json vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

ObjectKind parse_kind(const Reader& r) {
  const auto k = r.string("kind", "rigid");
  if (k == "rigid") return ObjectKind::Rigid;
  if (k == "revolute") return ObjectKind::Revolute;
  if (k == "prismatic") return ObjectKind::Prismatic;
  r.fail("kind", "unknown object kind '" + k + "'");
}

// Angles may be given in degrees ("lower_deg") or radians ("lower").
double angle_or_length(const Reader& r, const std::string& key, double fallback, bool angular) {
  const std::string deg = key + "_deg";
  if (angular && r.has(deg.c_str())) return r.number(deg.c_str()) * kDeg;
  return r.number(key.c_str(), fallback);
}

ObjectSpec parse_object(const Reader& r) {
  ObjectSpec o;
  o.name = r.string("name");
  o.kind = parse_kind(r);
  const bool angular = o.kind == ObjectKind::Revolute;
  if (o.kind == ObjectKind::Rigid) {
    o.position = r.vec3("position");
    o.yaw = r.has("yaw_deg") ? r.number("yaw_deg") * kDeg : r.number("yaw", 0.0);
    o.grasp_radius = r.positive("grasp_radius", o.grasp_radius);
    o.width = r.non_negative("width", o.width);
    if (r.has("mount") && !r.json().at("mount").is_null()) o.mount = r.string("mount");
    if (r.has("endpoints")) {
      const auto& eps = r.array("endpoints");
      for (std::size_t i = 0; i < eps.size(); ++i) {
        const auto& e = eps[i];
        if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() ||
            !e[2].is_number()) {
          r.fail("endpoints[" + std::to_string(i) + "]", "expected [x, y, z]");
        }
        o.endpoints.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
      }
    }
  } else {
    o.origin = r.vec3("origin");
    o.axis = r.vec3("axis");
    if (o.axis.norm() < 1e-12) r.fail("axis", "zero vector");
    o.axis.normalize();
    o.handle = r.vec3("handle", o.handle);
    o.lower = angle_or_length(r, "lower", 0.0, angular);
    o.upper = angle_or_length(r, "upper", 0.0, angular);
    o.initial = angle_or_length(r, "initial", o.lower, angular);
    o.grasp_radius = r.positive("grab_radius", o.grasp_radius);
    o.width = r.non_negative("width", 0.02);
    if (!(o.lower < o.upper)) r.fail("upper", "must be above lower");
    if (o.initial < o.lower || o.initial > o.upper) r.fail("initial", "outside [lower, upper]");
    if (angular && (o.lower < -std::numbers::pi || o.upper > std::numbers::pi)) {
      r.fail("upper", "revolute range must lie within [-180, 180] degrees");
    }
  }
  if (r.has("requires")) {
    const Reader q = r.child("requires");
    GraspRequirement g;
    g.object = q.string("object");
    g.at_least = q.has("at_least_deg") ? q.number("at_least_deg") * kDeg : q.number("at_least");
    o.requires_open = g;
  }
  return o;
}

SubgoalType parse_subgoal_type(const Reader& r) {
  const auto t = r.string("type");
  if (t == "articulation_at_least") return SubgoalType::ArticulationAtLeast;
  if (t == "released_in_region") return SubgoalType::ReleasedInRegion;
  if (t == "touch_success") return SubgoalType::TouchSuccess;
  if (t == "endpoints_in_region") return SubgoalType::EndpointsInRegion;
  r.fail("type", "unknown subgoal type '" + t + "'");
}

void parse_config(const Reader& root, TaskScenario& s) {
  if (!root.has("config")) return;
  const Reader c = root.child("config");
  SimConfig& cfg = s.config;

  if (c.has("quadstick")) {
    const Reader q = c.child("quadstick");
    cfg.quadstick.deadzone = q.number("deadzone", cfg.quadstick.deadzone);
    if (cfg.quadstick.deadzone < 0.0 || cfg.quadstick.deadzone >= 1.0) {
      q.fail("deadzone", "must lie in [0, 1)");
    }
    cfg.quadstick.switch_latency = q.non_negative("switch_latency", cfg.quadstick.switch_latency);
  }
  if (c.has("router")) {
    const Reader r = c.child("router");
    if (r.has("caps")) {
      const Reader k = r.child("caps");
      auto& caps = cfg.router.caps;
      caps.base_vx = k.positive("base_vx", caps.base_vx);
      caps.base_vy = k.positive("base_vy", caps.base_vy);
      caps.base_wyaw = k.positive("base_wyaw", caps.base_wyaw);
      caps.ee_linear = k.positive("ee_linear", caps.ee_linear);
      caps.ee_angular = k.positive("ee_angular", caps.ee_angular);
    }
    for (const char* key : {"q_front", "q_top"}) {
      if (!r.has(key)) continue;
      const auto q = r.numbers(key, kArmJoints);
      ArmVector& dst = std::string(key) == "q_front" ? cfg.router.q_front : cfg.router.q_top;
      for (int i = 0; i < kArmJoints; ++i) dst[i] = q[i];
    }
  }
  if (c.has("kinematics")) {
    const Reader k = c.child("kinematics");
    auto& kc = cfg.kinematics;
    if (k.has("penalty")) {
      const auto p = k.numbers("penalty", kDofs);
      for (int i = 0; i < kDofs; ++i) kc.weights.penalty[i] = p[i];
    }
    kc.weights.damping = k.number("damping", kc.weights.damping);
    try {
      kc.weights.validate();
    } catch (const ConfigError& e) {
      k.fail("penalty", e.what());
    }
    kc.projection.lookahead_dt = k.positive("lookahead_dt", kc.projection.lookahead_dt);
    kc.projection.limit_margin = k.non_negative("limit_margin", kc.projection.limit_margin);
    kc.projection.collision_margin =
        k.non_negative("collision_margin", kc.projection.collision_margin);
    kc.projection.max_halvings =
        static_cast<int>(k.non_negative("max_halvings", kc.projection.max_halvings));
    kc.projection.clearance_band = k.non_negative("clearance_band", kc.projection.clearance_band);
    kc.projection.clearance_recovery =
        k.non_negative("clearance_recovery", kc.projection.clearance_recovery);
    kc.base_assist_cap = k.non_negative("base_assist_cap", kc.base_assist_cap);
    kc.homing_rate = k.positive("homing_rate", kc.homing_rate);
    kc.homing_tolerance = k.positive("homing_tolerance", kc.homing_tolerance);
    kc.homing_stall_ticks =
        static_cast<int>(k.positive("homing_stall_ticks", kc.homing_stall_ticks));
  }
  if (c.has("locomotion")) {
    const Reader l = c.child("locomotion");
    auto& lc = cfg.locomotion;
    lc.max_speed = l.positive("max_speed", lc.max_speed);
    lc.yaw_rate_cap = l.positive("yaw_rate_cap", lc.yaw_rate_cap);
    lc.linear_accel = l.positive("linear_accel", lc.linear_accel);
    lc.yaw_accel = l.positive("yaw_accel", lc.yaw_accel);
  }
  if (c.has("safety")) {
    const Reader f = c.child("safety");
    auto& ft = cfg.safety.face_touch;
    ft.collision.threshold = f.positive("collision_threshold", ft.collision.threshold);
    ft.collision.release_fraction = f.number("release_fraction", ft.collision.release_fraction);
    try {
      ft.collision.validate();
    } catch (const ConfigError& e) {
      f.fail("release_fraction", e.what());
    }
    cfg.safety.wrench.stiffness = f.positive("stiffness", cfg.safety.wrench.stiffness);
    cfg.safety.wrench.noise_sigma = f.non_negative("force_noise", cfg.safety.wrench.noise_sigma);
    ft.approach.standoff = f.non_negative("standoff", ft.approach.standoff);
    ft.approach.transit_speed = f.positive("transit_speed", ft.approach.transit_speed);
    ft.approach.approach_speed = f.positive("approach_speed", ft.approach.approach_speed);
    ft.approach.overshoot = f.non_negative("overshoot", ft.approach.overshoot);
    ft.approach.pause_ticks = static_cast<int>(f.non_negative("pause_ticks", ft.approach.pause_ticks));
    ft.retract_speed = f.positive("retract_speed", ft.retract_speed);
    ft.clear_distance = f.positive("clear_distance", ft.clear_distance);
    ft.touch_force_min = f.positive("touch_force_min", ft.touch_force_min);
    ft.touch_dwell = f.non_negative("touch_dwell", ft.touch_dwell);
    ft.contact_timeout = f.positive("contact_timeout", ft.contact_timeout);
    ft.acquire_retries = static_cast<int>(f.positive("acquire_retries", ft.acquire_retries));
    ft.noise.position_sigma = f.non_negative("mouth_sigma", ft.noise.position_sigma);
    ft.noise.confidence_range = f.positive("confidence_range", ft.noise.confidence_range);
    ft.noise.min_confidence = f.non_negative("min_confidence", ft.noise.min_confidence);
    cfg.safety.reach_tolerance = f.positive("reach_tolerance", cfg.safety.reach_tolerance);
    if (ft.touch_force_min >= ft.collision.threshold) {
      f.fail("touch_force_min", "must be below collision_threshold");
    }
  }
  if (c.has("voice")) {
    try {
      cfg.voice = KeywordTable::from_json(c.json().at("voice"));
    } catch (const ConfigError& e) {
      throw ScenarioError(std::string("config.voice: ") + e.what());
    }
  }
  if (c.has("gripper")) {
    const Reader g = c.child("gripper");
    cfg.gripper.max_width = g.positive("max_width", cfg.gripper.max_width);
    cfg.gripper.speed = g.positive("speed", cfg.gripper.speed);
  }
  if (c.has("session")) {
    cfg.frame_timeout = c.child("session").positive("frame_timeout", cfg.frame_timeout);
  }
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

nlohmann::json parse_with_lines(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(what + ": parse error at line " +
                        std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(ObjectKind k) noexcept {
  switch (k) {
    case ObjectKind::Rigid:
      return "rigid";
    case ObjectKind::Revolute:
      return "revolute";
    case ObjectKind::Prismatic:
      return "prismatic";
  }
  return "?";
}

std::string_view to_string(SubgoalType t) noexcept {
  switch (t) {
    case SubgoalType::ArticulationAtLeast:
      return "articulation_at_least";
    case SubgoalType::ReleasedInRegion:
      return "released_in_region";
    case SubgoalType::TouchSuccess:
      return "touch_success";
    case SubgoalType::EndpointsInRegion:
      return "endpoints_in_region";
  }
  return "?";
}

int TaskScenario::object_index(std::string_view n) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].name == n) return static_cast<int>(i);
  }
  return -1;
}

const Region* TaskScenario::region(std::string_view n) const {
  for (const auto& r : regions) {
    if (r.name == n) return &r;
  }
  return nullptr;
}

int TaskScenario::max_points() const {
  int total = 0;
  for (const auto& t : tasks) {
    for (const auto& g : t.subgoals) total += g.points;
  }
  return total;
}

std::int64_t TaskScenario::duration_ticks() const {
  return static_cast<std::int64_t>(std::llround(duration / dt));
}

TaskScenario scenario_from_json(const nlohmann::json& input,
                                const std::filesystem::path& base_dir) {
  if (!input.is_object()) throw ScenarioError("scenario: expected a json object");
  nlohmann::json j = input;
  TaskScenario s;
  const Reader root(j, "");
  s.name = root.string("name");
  s.version = root.string("version", "1");

  // Robot model: inline object, path relative to the scenario, or the bundled default.
  if (root.has("robot_model")) {
    const auto& rm = j.at("robot_model");
    if (rm.is_string()) {
      const auto path = base_dir / rm.get<std::string>();
      j["robot_model"] = parse_with_lines(read_file(path), path.string());
    }
    s.robot_model = RobotModel::from_json(j.at("robot_model"));
  } else {
    j["robot_model"] = s.robot_model.to_json();
  }

  const Reader world = root.child("world");
  s.dt = world.positive("dt", s.dt);
  s.duration = world.positive("duration", s.duration);
  if (world.has("seed")) {
    const auto& seed = j.at("world").at("seed");
    const bool whole = seed.is_number_unsigned() ||
                       (seed.is_number_integer() && seed.get<std::int64_t>() >= 0);
    if (!whole) world.fail("seed", "expected a non-negative integer");
    s.seed = seed.get<std::uint64_t>();
  }

  parse_config(root, s);
  s.initial_robot.arm_q = s.config.router.q_front;
  if (world.has("robot")) {
    const Reader r = world.child("robot");
    if (r.has("base")) {
      const auto b = r.numbers("base", 3);
      s.initial_robot.base_x = b[0];
      s.initial_robot.base_y = b[1];
      s.initial_robot.base_yaw = normalize_angle(b[2]);
    }
    if (r.has("arm_q")) {
      const auto q = r.numbers("arm_q", kArmJoints);
      for (int i = 0; i < kArmJoints; ++i) s.initial_robot.arm_q[i] = q[i];
    }
  }
  if (!within_limits(s.initial_robot, s.robot_model)) {
    world.fail("robot.arm_q", "outside the joint limits");
  }

  if (world.has("regions")) {
    const auto& regions = world.array("regions");
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const Reader r = Reader(world.json().at("regions"), world.path() + ".regions").at(i);
      Region g;
      g.name = r.string("name");
      g.min = r.vec3("min");
      g.max = r.vec3("max");
      if (!(g.min.array() <= g.max.array()).all()) r.fail("max", "must be >= min");
      if (s.region(g.name)) r.fail("name", "duplicate region '" + g.name + "'");
      s.regions.push_back(g);
    }
  }

  if (world.has("objects")) {
    const auto& objects = world.array("objects");
    const Reader list(world.json().at("objects"), (world.path().empty() ? "" : world.path() + ".") + "objects");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      auto o = parse_object(list.at(i));
      if (s.object_index(o.name) >= 0) list.at(i).fail("name", "duplicate object '" + o.name + "'");
      s.objects.push_back(std::move(o));
    }
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const auto& o = s.objects[i];
      const Reader r = list.at(i);
      if (o.mount) {
        const int m = s.object_index(*o.mount);
        if (m < 0) r.fail("mount", "undefined object '" + *o.mount + "'");
        if (!s.objects[m].is_articulation()) r.fail("mount", "'" + *o.mount + "' is not an articulation");
      }
      if (o.requires_open) {
        const int m = s.object_index(o.requires_open->object);
        if (m < 0) r.fail("requires.object", "undefined object '" + o.requires_open->object + "'");
        if (!s.objects[m].is_articulation()) {
          r.fail("requires.object", "'" + o.requires_open->object + "' is not an articulation");
        }
      }
    }
  }

  if (world.has("pilot")) {
    const Reader p = world.child("pilot");
    s.head.center = p.vec3("head_center");
    s.head.facing = p.vec3("facing", s.head.facing);
    if (s.head.facing.norm() < 1e-12) p.fail("facing", "zero vector");
    s.head.facing.normalize();
    s.head.radius = p.positive("radius", s.head.radius);
    if (p.has("motion")) {
      const Reader m = p.child("motion");
      s.head_motion.amplitude = m.vec3("amplitude", s.head_motion.amplitude);
      s.head_motion.period = m.positive("period", s.head_motion.period);
    }
  } else {
    // No pilot in the scene: park the head far away.
    s.head.center = Eigen::Vector3d(0.0, 0.0, -100.0);
  }

  if (world.has("camera")) {
    const Reader c = world.child("camera");
    auto& cam = s.camera;
    cam.frame = c.string("frame", cam.frame);
    cam.offset = c.vec3("offset", cam.offset);
    cam.forward = c.vec3("forward", cam.forward);
    if (cam.forward.norm() < 1e-12) c.fail("forward", "zero vector");
    cam.forward.normalize();
    cam.half_fov = c.positive("half_fov", cam.half_fov);
    cam.min_range = c.non_negative("min_range", cam.min_range);
    cam.max_range = c.positive("max_range", cam.max_range);
    bool known = cam.frame == "base" || cam.frame == "tool";
    for (const auto& jt : s.robot_model.joints) known = known || jt.name == cam.frame;
    if (!known) c.fail("frame", "unknown frame '" + cam.frame + "'");
  }

  const auto& tasks = root.array("tasks");
  const Reader task_list(j.at("tasks"), "tasks");
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const Reader t = task_list.at(ti);
    TaskSpec task;
    task.name = t.string("name");
    const auto& goals = t.array("subgoals");
    const Reader goal_list(t.json().at("subgoals"), t.path() + ".subgoals");
    std::set<std::string> seen;
    for (std::size_t gi = 0; gi < goals.size(); ++gi) {
      const Reader g = goal_list.at(gi);
      SubgoalSpec sg;
      sg.id = g.string("id");
      if (!seen.insert(sg.id).second) g.fail("id", "duplicate subgoal '" + sg.id + "'");
      sg.type = parse_subgoal_type(g);
      sg.points = static_cast<int>(g.non_negative("points", 1));
      sg.object = g.string("object", "");
      const bool needs_object = sg.type != SubgoalType::TouchSuccess;
      if (needs_object && sg.object.empty()) g.fail("object", "missing");
      if (!sg.object.empty()) {
        const int oi = s.object_index(sg.object);
        if (oi < 0) g.fail("object", "undefined object '" + sg.object + "'");
        const bool art = s.objects[oi].is_articulation();
        if (sg.type == SubgoalType::ArticulationAtLeast && !art) {
          g.fail("object", "'" + sg.object + "' is not an articulation");
        }
        if (sg.type != SubgoalType::ArticulationAtLeast && art) {
          g.fail("object", "'" + sg.object + "' is not a graspable object");
        }
        if (sg.type == SubgoalType::EndpointsInRegion && s.objects[oi].endpoints.empty()) {
          g.fail("object", "'" + sg.object + "' has no endpoints");
        }
      }
      if (sg.type == SubgoalType::ArticulationAtLeast) {
        const bool angular = s.objects[s.object_index(sg.object)].kind == ObjectKind::Revolute;
        sg.threshold = angular && g.has("value_deg") ? g.number("value_deg") * kDeg
                                                     : g.number("value");
      }
      if (sg.type == SubgoalType::ReleasedInRegion || sg.type == SubgoalType::EndpointsInRegion) {
        sg.region = g.string("region");
        if (!s.region(sg.region)) g.fail("region", "undefined region '" + sg.region + "'");
      }
      if (g.has("after")) {
        const auto& after = g.array("after");
        for (const auto& a : after) {
          if (!a.is_string()) g.fail("after", "expected subgoal ids");
          const auto id = a.get<std::string>();
          if (!seen.count(id) || id == sg.id) {
            g.fail("after", "'" + id + "' is not an earlier subgoal of this task");
          }
          sg.after.push_back(id);
        }
      }
      task.subgoals.push_back(std::move(sg));
    }
    s.tasks.push_back(std::move(task));
  }

  s.source = j;
  s.digest = to_hex(sha256(j.dump()));
  return s;
}

TaskScenario scenario_from_text(const std::string& text, const std::filesystem::path& base_dir) {
  return scenario_from_json(parse_with_lines(text, "scenario"), base_dir);
}

TaskScenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_text(read_file(path), path.parent_path());
}

nlohmann::json scenario_summary(const TaskScenario& s) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : s.regions) {
    regions.push_back({{"name", r.name}, {"min", vec(r.min)}, {"max", vec(r.max)}});
  }
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : s.objects) {
    nlohmann::json jo{{"name", o.name}, {"kind", to_string(o.kind)}};
    if (o.is_articulation()) {
      jo["origin"] = vec(o.origin);
      jo["axis"] = vec(o.axis);
      jo["handle"] = vec(o.handle);
      jo["lower"] = o.lower;
      jo["upper"] = o.upper;
    } else {
      nlohmann::json eps = nlohmann::json::array();
      for (const auto& e : o.endpoints) eps.push_back(vec(e));
      jo["endpoints"] = eps;
    }
    objects.push_back(jo);
  }
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : s.tasks) {
    nlohmann::json goals = nlohmann::json::array();
    for (const auto& g : t.subgoals) {
      goals.push_back({{"id", g.id}, {"type", to_string(g.type)}, {"points", g.points}});
    }
    tasks.push_back({{"name", t.name}, {"subgoals", goals}});
  }
  return {{"name", s.name},
          {"version", s.version},
          {"digest", s.digest},
          {"dt", s.dt},
          {"duration", s.duration},
          {"regions", regions},
          {"objects", objects},
          {"tasks", tasks},
          {"max_points", s.max_points()},
          {"robot_model", s.robot_model.to_json()}};
}

}  // namespace quadassist
