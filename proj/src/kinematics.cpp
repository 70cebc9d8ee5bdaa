#include "quadassist/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "quadassist/errors.hpp"

namespace quadassist {

namespace {

Eigen::Vector3d vec3_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ScenarioError(where + ": expected [x, y, z]");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ScenarioError(where + ": expected numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

nlohmann::json vec3_to_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

double number_or(const nlohmann::json& j, const char* key, double fallback,
                 const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ScenarioError(where + "." + key + ": expected a number");
  return it->get<double>();
}

Eigen::Isometry3d planar_base(const RobotConfiguration& c) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translate(Eigen::Vector3d(c.base_x, c.base_y, 0.0));
  t.rotate(Eigen::AngleAxisd(c.base_yaw, Eigen::Vector3d::UnitZ()));
  return t;
}

struct PlacedProxy {
  const ProxyBody* body;
  Eigen::Vector3d a;
  Eigen::Vector3d b;
  bool base_fixed;
};

std::vector<PlacedProxy> place_proxies(const RobotConfiguration& config,
                                       const RobotModel& model) {
  const auto fk = forward_kinematics_frames(config, model);
  std::vector<PlacedProxy> placed;
  placed.reserve(model.proxies.size());
  for (const auto& p : model.proxies) {
    const Eigen::Isometry3d* frame = nullptr;
    if (p.frame == "base") {
      frame = &fk.base_frame;
    } else if (p.frame == "tool") {
      frame = &fk.tool_frame;
    } else {
      for (int i = 0; i < kArmJoints; ++i) {
        if (model.joints[i].name == p.frame) frame = &fk.joint_frames[i];
      }
    }
    placed.push_back({&p, *frame * p.a, *frame * p.b, p.frame == "base"});
  }
  return placed;
}

bool pair_ignored(const RobotModel& model, const std::string& a, const std::string& b) {
  return std::any_of(model.ignored_pairs.begin(), model.ignored_pairs.end(),
                     [&](const auto& pr) {
                       return (pr.first == a && pr.second == b) ||
                              (pr.first == b && pr.second == a);
                     });
}

}  // namespace

RobotModel RobotModel::standard() {
  using V = Eigen::Vector3d;
  RobotModel m;
  m.name = "quadruped_arm";
  m.joints = {
      {"shoulder_yaw", V::UnitZ(), V(0.2, 0.0, 0.65), -2.8, 2.8},
      {"shoulder_pitch", V::UnitY(), V(0.0, 0.0, 0.1), -2.0, 1.6},
      {"elbow_pitch", V::UnitY(), V(0.4, 0.0, 0.0), -0.2, 2.7},
      {"forearm_roll", V::UnitX(), V(0.2, 0.0, 0.0), -3.0, 3.0},
      {"wrist_pitch", V::UnitY(), V(0.15, 0.0, 0.0), -2.0, 2.0},
      {"wrist_roll", V::UnitX(), V(0.1, 0.0, 0.0), -3.0, 3.0},
  };
  m.tool_offset = V(0.1, 0.0, 0.0);
  m.proxies = {
      {"trunk", "base", V(-0.3, 0.0, 0.5), V(0.3, 0.0, 0.5), 0.15},
      {"leg_lf", "base", V(0.3, 0.2, 0.42), V(0.32, 0.22, 0.03), 0.05},
      {"leg_rf", "base", V(0.3, -0.2, 0.42), V(0.32, -0.22, 0.03), 0.05},
      {"leg_lh", "base", V(-0.3, 0.2, 0.42), V(-0.32, 0.22, 0.03), 0.05},
      {"leg_rh", "base", V(-0.3, -0.2, 0.42), V(-0.32, -0.22, 0.03), 0.05},
      {"upper_arm", "shoulder_pitch", V(0.0, 0.0, 0.0), V(0.4, 0.0, 0.0), 0.05},
      {"forearm", "elbow_pitch", V(0.0, 0.0, 0.0), V(0.35, 0.0, 0.0), 0.045},
      {"wrist", "wrist_pitch", V(0.0, 0.0, 0.0), V(0.2, 0.0, 0.0), 0.04},
  };
  m.ignored_pairs = {{"upper_arm", "forearm"}, {"forearm", "wrist"}};
  return m;
}

RobotModel RobotModel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ScenarioError("robot_model: expected an object");
  RobotModel m;
  m.name = j.value("name", std::string("robot"));

  const auto joints = j.find("joints");
  if (joints == j.end() || !joints->is_array()) {
    throw ScenarioError("robot_model.joints: expected an array");
  }
  for (std::size_t i = 0; i < joints->size(); ++i) {
    const auto& jj = (*joints)[i];
    const std::string where = "robot_model.joints[" + std::to_string(i) + "]";
    JointSpec spec;
    spec.name = jj.value("name", "joint" + std::to_string(i + 1));
    if (!jj.contains("axis")) throw ScenarioError(where + ".axis: missing");
    spec.axis = vec3_from_json(jj["axis"], where + ".axis");
    if (spec.axis.norm() < 1e-12) throw ScenarioError(where + ".axis: zero vector");
    spec.axis.normalize();
    spec.origin = jj.contains("origin") ? vec3_from_json(jj["origin"], where + ".origin")
                                        : Eigen::Vector3d::Zero();
    spec.lower = number_or(jj, "lower", spec.lower, where);
    spec.upper = number_or(jj, "upper", spec.upper, where);
    m.joints.push_back(spec);
  }
  if (j.contains("tool_offset")) {
    m.tool_offset = vec3_from_json(j["tool_offset"], "robot_model.tool_offset");
  }
  if (j.contains("proxies")) {
    const auto& proxies = j["proxies"];
    if (!proxies.is_array()) throw ScenarioError("robot_model.proxies: expected an array");
    for (std::size_t i = 0; i < proxies.size(); ++i) {
      const auto& pj = proxies[i];
      const std::string where = "robot_model.proxies[" + std::to_string(i) + "]";
      ProxyBody p;
      p.name = pj.value("name", "proxy" + std::to_string(i));
      p.frame = pj.value("frame", std::string("base"));
      if (pj.contains("center")) {
        p.a = p.b = vec3_from_json(pj["center"], where + ".center");
      } else {
        if (!pj.contains("a") || !pj.contains("b")) {
          throw ScenarioError(where + ": needs 'center' or 'a' and 'b'");
        }
        p.a = vec3_from_json(pj["a"], where + ".a");
        p.b = vec3_from_json(pj["b"], where + ".b");
      }
      p.radius = number_or(pj, "radius", 0.0, where);
      m.proxies.push_back(p);
    }
  }
  if (j.contains("ignored_pairs")) {
    for (const auto& pr : j["ignored_pairs"]) {
      if (!pr.is_array() || pr.size() != 2 || !pr[0].is_string() || !pr[1].is_string()) {
        throw ScenarioError("robot_model.ignored_pairs: expected [name, name] entries");
      }
      m.ignored_pairs.emplace_back(pr[0].get<std::string>(), pr[1].get<std::string>());
    }
  }
  m.validate();
  return m;
}

nlohmann::json RobotModel::to_json() const {
  nlohmann::json joints_json = nlohmann::json::array();
  for (const auto& jt : joints) {
    joints_json.push_back({{"name", jt.name},
                           {"axis", vec3_to_json(jt.axis)},
                           {"origin", vec3_to_json(jt.origin)},
                           {"lower", jt.lower},
                           {"upper", jt.upper}});
  }
  nlohmann::json proxies_json = nlohmann::json::array();
  for (const auto& p : proxies) {
    proxies_json.push_back({{"name", p.name},
                            {"frame", p.frame},
                            {"a", vec3_to_json(p.a)},
                            {"b", vec3_to_json(p.b)},
                            {"radius", p.radius}});
  }
  nlohmann::json ignored = nlohmann::json::array();
  for (const auto& [a, b] : ignored_pairs) ignored.push_back({a, b});
  return {{"name", name},
          {"joints", joints_json},
          {"tool_offset", vec3_to_json(tool_offset)},
          {"proxies", proxies_json},
          {"ignored_pairs", ignored}};
}

void RobotModel::validate() const {
  if (joints.size() != static_cast<std::size_t>(kArmJoints)) {
    throw ScenarioError("robot_model.joints: expected 6 joints, got " +
                        std::to_string(joints.size()));
  }
  for (const auto& jt : joints) {
    if (!(jt.lower < jt.upper)) {
      throw ScenarioError("robot_model joint '" + jt.name + "': lower must be below upper");
    }
  }
  auto frame_known = [&](const std::string& f) {
    if (f == "base" || f == "tool") return true;
    return std::any_of(joints.begin(), joints.end(),
                       [&](const JointSpec& jt) { return jt.name == f; });
  };
  auto proxy_known = [&](const std::string& n) {
    return std::any_of(proxies.begin(), proxies.end(),
                       [&](const ProxyBody& p) { return p.name == n; });
  };
  for (const auto& p : proxies) {
    if (!frame_known(p.frame)) {
      throw ScenarioError("robot_model proxy '" + p.name + "': unknown frame '" + p.frame + "'");
    }
    if (!(p.radius >= 0.0)) {
      throw ScenarioError("robot_model proxy '" + p.name + "': negative radius");
    }
  }
  for (const auto& [a, b] : ignored_pairs) {
    if (!proxy_known(a) || !proxy_known(b)) {
      throw ScenarioError("robot_model.ignored_pairs: unknown proxy in (" + a + ", " + b + ")");
    }
  }
}

void WholeBodyWeights::validate() const {
  for (double p : penalty) {
    if (!(p > 0.0)) throw ConfigError("whole-body penalties must be positive");
  }
  if (!(damping > 0.0) || !std::isfinite(damping)) {
    throw ConfigError("whole-body damping must be positive");
  }
}

double normalize_angle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

RobotConfiguration sanitize(const RobotConfiguration& config, const RobotModel& model) {
  RobotConfiguration out = config;
  out.base_yaw = normalize_angle(config.base_yaw);
  for (int i = 0; i < kArmJoints; ++i) {
    out.arm_q[i] = std::clamp(config.arm_q[i], model.joints[i].lower, model.joints[i].upper);
  }
  return out;
}

bool within_limits(const RobotConfiguration& config, const RobotModel& model) {
  for (int i = 0; i < kArmJoints; ++i) {
    if (config.arm_q[i] < model.joints[i].lower || config.arm_q[i] > model.joints[i].upper) {
      return false;
    }
  }
  return true;
}

ForwardKinematicsResult forward_kinematics_frames(const RobotConfiguration& config,
                                                  const RobotModel& model) {
  ForwardKinematicsResult out;
  out.base_frame = planar_base(config);
  Eigen::Isometry3d t = out.base_frame;
  for (int i = 0; i < kArmJoints; ++i) {
    const auto& jt = model.joints[i];
    t.translate(jt.origin);
    t.rotate(Eigen::AngleAxisd(config.arm_q[i], jt.axis));
    out.joint_frames[i] = t;
  }
  out.tool_frame = t;
  out.tool_frame.translate(model.tool_offset);
  return out;
}

EEPose forward_kinematics(const RobotConfiguration& config, const RobotModel& model) {
  const auto fk = forward_kinematics_frames(config, model);
  EEPose pose;
  pose.position = fk.tool_frame.translation();
  pose.orientation = Eigen::Quaterniond(fk.tool_frame.rotation()).normalized();
  return pose;
}

Jacobian jacobian(const RobotConfiguration& config, const RobotModel& model) {
  const auto fk = forward_kinematics_frames(config, model);
  const Eigen::Vector3d p = fk.tool_frame.translation();
  Jacobian j = Jacobian::Zero();

  j.block<3, 1>(0, 0) = Eigen::Vector3d::UnitX();
  j.block<3, 1>(0, 1) = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d base_origin(config.base_x, config.base_y, 0.0);
  j.block<3, 1>(0, 2) = z.cross(p - base_origin);
  j.block<3, 1>(3, 2) = z;

  for (int i = 0; i < kArmJoints; ++i) {
    const Eigen::Vector3d axis = fk.joint_frames[i].rotation() * model.joints[i].axis;
    const Eigen::Vector3d origin = fk.joint_frames[i].translation();
    j.block<3, 1>(0, kBaseDofs + i) = axis.cross(p - origin);
    j.block<3, 1>(3, kBaseDofs + i) = axis;
  }
  return j;
}

Vector9 dls_rates(const Jacobian& jac, const Twist& target_twist,
                  const WholeBodyWeights& weights) {
  Vector9 w_inv;
  for (int i = 0; i < kDofs; ++i) {
    w_inv[i] = std::isinf(weights.penalty[i]) ? 0.0 : 1.0 / weights.penalty[i];
  }
  const Eigen::Matrix<double, kDofs, 6> wjt = w_inv.asDiagonal() * jac.transpose();
  Eigen::Matrix<double, 6, 6> a = jac * wjt;
  a.diagonal().array() += weights.damping * weights.damping;
  return wjt * a.ldlt().solve(target_twist);
}

Vector9 project_rates(const RobotConfiguration& config, const Vector9& rates,
                      const RobotModel& model, const RateProjection& projection) {
  Vector9 out = rates;
  for (int i = 0; i < kArmJoints; ++i) {
    const double q = config.arm_q[i];
    double& r = out[kBaseDofs + i];
    if (r > 0.0 && q >= model.joints[i].upper - projection.limit_margin) r = 0.0;
    if (r < 0.0 && q <= model.joints[i].lower + projection.limit_margin) r = 0.0;
  }

  if (out.tail<kArmJoints>().isZero(0.0) || model.proxies.empty()) return out;

  // Base motion cannot change self-collision, so only arm rates are scaled.
  const double now = min_separation(config, model);
  auto safe = [&](const Vector9& candidate) {
    const double next = min_separation(
        integrate_rates(config, candidate, projection.lookahead_dt, model), model);
    return next >= projection.collision_margin || next >= now;
  };
  if (safe(out)) return out;
  Vector9 scaled = out;
  for (int k = 0; k < projection.max_halvings; ++k) {
    scaled.tail<kArmJoints>() *= 0.5;
    if (safe(scaled)) return scaled;
  }
  out.tail<kArmJoints>().setZero();
  return out;
}

Vector9 solve_whole_body_rates(const RobotConfiguration& config, const Twist& target_twist,
                               const WholeBodyWeights& weights, const RobotModel& model,
                               const RateProjection& projection) {
  if (!target_twist.allFinite()) throw ContractError("target twist must be finite");
  if (target_twist.isZero(0.0)) return Vector9::Zero();
  const Jacobian jac = jacobian(config, model);

  auto into_limit = [&](int i, double r) {
    const double q = config.arm_q[i];
    return (r > 0.0 && q >= model.joints[i].upper - projection.limit_margin) ||
           (r < 0.0 && q <= model.joints[i].lower + projection.limit_margin);
  };

  // Held proxy pairs, orthonormalized in arm space; `particular` meets their rates.
  std::vector<std::size_t> held_pairs;
  std::vector<ArmVector> basis;
  ArmVector particular = ArmVector::Zero();
  const auto pairs = model.proxies.empty() ? std::vector<ProxyPairDistance>{}
                                           : proxy_separations(config, model);
  auto gradient = [&](std::size_t p) {
    constexpr double kStep = 1e-6;
    ArmVector g;
    for (int i = 0; i < kArmJoints; ++i) {
      RobotConfiguration plus = config;
      RobotConfiguration minus = config;
      plus.arm_q[i] += kStep;
      minus.arm_q[i] -= kStep;
      g[i] = (proxy_separations(plus, model)[p].separation -
              proxy_separations(minus, model)[p].separation) /
             (2 * kStep);
    }
    return g;
  };

  ArmVector keep = ArmVector::Ones();
  Vector9 rates = dls_rates(jac, target_twist, weights);
  for (int pass = 0; pass < 2 * kArmJoints + 2; ++pass) {
    bool changed = false;
    for (int i = 0; i < kArmJoints; ++i) {
      if (keep[i] != 0.0 && into_limit(i, rates[kBaseDofs + i])) {
        keep[i] = 0.0;
        changed = true;
      }
    }
    if (changed) {
      // Locking a joint invalidates the held directions; rebuild them.
      basis.clear();
      particular.setZero();
      const auto again = held_pairs;
      held_pairs.clear();
      for (auto p : again) held_pairs.push_back(p);
    }
    std::vector<std::size_t> to_add;
    const double band = projection.collision_margin + projection.clearance_band;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (pairs[p].separation >= band) continue;
      const bool held = std::find(held_pairs.begin(), held_pairs.end(), p) != held_pairs.end();
      if (held && !changed) continue;
      // Velocity damper: closing slows to zero at the margin and turns outward below it.
      const double allowed =
          projection.clearance_recovery * (projection.collision_margin - pairs[p].separation);
      const ArmVector g = gradient(p).cwiseProduct(keep);
      if (!held && g.dot(rates.tail<kArmJoints>()) >= allowed) continue;
      if (!held) held_pairs.push_back(p);
      ArmVector residual = g;
      for (const auto& u : basis) residual -= u.dot(g) * u;
      // Nearly dependent constraints are already implied by the held ones.
      if (residual.norm() < 0.2 * g.norm() || g.norm() < 1e-9) continue;
      const ArmVector u = residual.normalized();
      particular += (allowed - g.dot(particular)) / g.dot(u) * u;
      basis.push_back(u);
      changed = true;
    }
    if (!changed) break;

    // Free arm directions: orthogonal to the held basis, zero on locked joints.
    Eigen::Matrix<double, kArmJoints, kArmJoints> free_arm = keep.asDiagonal();
    for (const auto& u : basis) free_arm -= u * u.transpose();
    Jacobian work = jac;
    work.rightCols<kArmJoints>() = jac.rightCols<kArmJoints>() * free_arm;
    Vector9 offset = Vector9::Zero();
    offset.tail<kArmJoints>() = particular;
    rates = dls_rates(work, target_twist - jac * offset, weights);
    rates.tail<kArmJoints>() = free_arm * rates.tail<kArmJoints>() + particular;
  }
  return project_rates(config, rates, model, projection);
}

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1) {
  // Closest points between segments p0p1 and q0q1.
  constexpr double kEps = 1e-15;
  const Eigen::Vector3d d1 = p1 - p0;
  const Eigen::Vector3d d2 = q1 - q0;
  const Eigen::Vector3d r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) return r.norm();
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + d1 * s) - (q0 + d2 * t)).norm();
}

std::vector<ProxyPairDistance> proxy_separations(const RobotConfiguration& config,
                                                 const RobotModel& model) {
  const auto placed = place_proxies(config, model);
  std::vector<ProxyPairDistance> out;
  for (std::size_t i = 0; i < placed.size(); ++i) {
    for (std::size_t k = i + 1; k < placed.size(); ++k) {
      const auto& u = placed[i];
      const auto& w = placed[k];
      if (u.base_fixed && w.base_fixed) continue;
      if (u.body->frame == w.body->frame) continue;
      if (pair_ignored(model, u.body->name, w.body->name)) continue;
      const double d = segment_distance(u.a, u.b, w.a, w.b) - u.body->radius - w.body->radius;
      out.push_back({u.body->name, w.body->name, d});
    }
  }
  return out;
}

double min_separation(const RobotConfiguration& config, const RobotModel& model) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : proxy_separations(config, model)) best = std::min(best, p.separation);
  return best;
}

std::vector<std::string> check_self_collision(const RobotConfiguration& config,
                                              const RobotModel& model, double margin) {
  std::vector<std::string> hits;
  for (const auto& p : proxy_separations(config, model)) {
    if (p.separation < margin) hits.push_back(p.first + "|" + p.second);
  }
  return hits;
}

RobotConfiguration integrate_rates(const RobotConfiguration& config, const Vector9& rates,
                                   double dt, const RobotModel& model) {
  if (!(dt > 0.0)) throw ContractError("integration step must be positive");
  RobotConfiguration next = config;
  next.base_x += rates[0] * dt;
  next.base_y += rates[1] * dt;
  next.base_yaw += rates[2] * dt;
  next.arm_q += rates.tail<kArmJoints>() * dt;
  return sanitize(next, model);
}

Twist pose_error(const EEPose& current, const EEPose& target) {
  Twist e;
  e.head<3>() = target.position - current.position;
  Eigen::Quaterniond q = target.orientation * current.orientation.conjugate();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Eigen::AngleAxisd aa(q.normalized());
  e.tail<3>() = aa.axis() * aa.angle();
  return e;
}

}  // namespace quadassist
