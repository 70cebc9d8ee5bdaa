#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "doctest.h"
#include "quadassist/control_router.hpp"
#include "quadassist/errors.hpp"
#include "quadassist/kinematics.hpp"
#include "kinematics_oracle.hpp"
#include "servo_harness.hpp"

using namespace quadassist;
using quadassist::testing::finite_difference_jacobian;
using quadassist::testing::random_config;
using quadassist::testing::random_reachable_target;
using quadassist::testing::servo_to;

namespace {

using Mat4 = Eigen::Matrix4d;

Mat4 trans(double x, double y, double z) {
  Mat4 m = Mat4::Identity();
  m(0, 3) = x;
  m(1, 3) = y;
  m(2, 3) = z;
  return m;
}

Mat4 rot(char axis, double a) {
  const double c = std::cos(a);
  const double s = std::sin(a);
  Mat4 m = Mat4::Identity();
  if (axis == 'x') {
    m(1, 1) = c;
    m(1, 2) = -s;
    m(2, 1) = s;
    m(2, 2) = c;
  } else if (axis == 'y') {
    m(0, 0) = c;
    m(0, 2) = s;
    m(2, 0) = -s;
    m(2, 2) = c;
  } else {
    m(0, 0) = c;
    m(0, 1) = -s;
    m(1, 0) = s;
    m(1, 1) = c;
  }
  return m;
}

// Hand-composed chain for the bundled model; constants copied from the model file.
Mat4 oracle_tool(const RobotConfiguration& c) {
  const auto& q = c.arm_q;
  return trans(c.base_x, c.base_y, 0) * rot('z', c.base_yaw) * trans(0.2, 0, 0.65) *
         rot('z', q[0]) * trans(0, 0, 0.1) * rot('y', q[1]) * trans(0.4, 0, 0) * rot('y', q[2]) *
         trans(0.2, 0, 0) * rot('x', q[3]) * trans(0.15, 0, 0) * rot('y', q[4]) *
         trans(0.1, 0, 0) * rot('x', q[5]) * trans(0.1, 0, 0);
}

}  // namespace

TEST_CASE("forward_kinematics: zero configuration matches the transform chain oracle") {
  const auto model = RobotModel::standard();
  const auto pose = forward_kinematics(RobotConfiguration{}, model);
  CHECK(pose.position.x() == doctest::Approx(1.15));
  CHECK(pose.position.y() == doctest::Approx(0.0));
  CHECK(pose.position.z() == doctest::Approx(0.75));
  CHECK(pose.orientation.angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);
}

TEST_CASE("forward_kinematics: random configurations match the transform chain oracle") {
  const auto model = RobotModel::standard();
  std::mt19937_64 gen(21);
  for (int i = 0; i < 2000; ++i) {
    const auto c = random_config(gen, model);
    const auto pose = forward_kinematics(c, model);
    const Mat4 t = oracle_tool(c);
    REQUIRE((pose.position - t.block<3, 1>(0, 3)).norm() < 1e-12);
    const Eigen::Matrix3d r = pose.orientation.toRotationMatrix();
    REQUIRE((r - t.block<3, 3>(0, 0)).norm() < 1e-12);
    REQUIRE(std::abs(pose.orientation.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("forward_kinematics: planar translation and yaw symmetry") {
  const auto model = RobotModel::standard();
  std::mt19937_64 gen(22);
  for (int i = 0; i < 200; ++i) {
    auto c = random_config(gen, model);
    c.base_x = c.base_y = c.base_yaw = 0.0;
    const auto p0 = forward_kinematics(c, model).position;
    auto moved = c;
    moved.base_x = 1.0;
    moved.base_y = 2.0;
    const auto p1 = forward_kinematics(moved, model).position;
    REQUIRE((p1 - p0 - Eigen::Vector3d(1, 2, 0)).norm() < 1e-12);
  }
  RobotConfiguration c;
  c.base_yaw = std::numbers::pi;
  const auto p0 = forward_kinematics(RobotConfiguration{}, model).position;
  const auto p1 = forward_kinematics(c, model).position;
  CHECK(p1.x() == doctest::Approx(-p0.x()));
  CHECK(p1.y() == doctest::Approx(-p0.y()).epsilon(1e-12));
  CHECK(p1.z() == doctest::Approx(p0.z()));
}

TEST_CASE("jacobian: base columns, linearity, finite differences") {
  const auto model = RobotModel::standard();
  std::mt19937_64 gen(23);
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_config(gen, model);
    const Jacobian j = jacobian(c, model);
    REQUIRE(j.allFinite());
    REQUIRE(j.col(0).isApprox((Vector6() << 1, 0, 0, 0, 0, 0).finished()));
    REQUIRE(j.col(1).isApprox((Vector6() << 0, 1, 0, 0, 0, 0).finished()));
    REQUIRE((j * Vector9::Zero()).isZero(0.0));
    const Jacobian fd = finite_difference_jacobian(c, model, 1e-6);
    for (int k = 0; k < kDofs; ++k) {
      const double scale = std::max(1.0, j.col(k).norm());
      REQUIRE((j.col(k) - fd.col(k)).norm() / scale < 1e-5);
    }
  }
}

TEST_CASE("dls_rates: residual at a generic configuration") {
  const auto model = RobotModel::standard();
  RobotConfiguration c;
  c.arm_q << 0.2, -0.3, 1.1, 0.3, -0.4, 0.2;
  Twist v;
  v << 0.0, 0.1, 0.0, 0.0, 0.0, 0.0;
  const Vector9 rates = dls_rates(jacobian(c, model), v, WholeBodyWeights{});
  CHECK((jacobian(c, model) * rates - v).norm() / v.norm() < 0.05);
  CHECK((solve_whole_body_rates(c, Twist::Zero(), WholeBodyWeights{}, model)).isZero(0.0));

  Twist bad = v;
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_whole_body_rates(c, bad, WholeBodyWeights{}, model), ContractError);
}

TEST_CASE("dls_rates: bounded by the singular-value oracle near a stretched arm") {
  const auto model = RobotModel::standard();
  const WholeBodyWeights w;
  for (double elbow : {0.0, 1e-3, 0.02, 0.1}) {
    RobotConfiguration c;
    c.arm_q << 0.0, 0.0, elbow, 0.0, 0.0, 0.0;
    const Jacobian j = jacobian(c, model);
    // Work in the penalty metric: J W^-1/2 is what the damped solve inverts.
    Vector9 w_inv_sqrt;
    for (int i = 0; i < kDofs; ++i) w_inv_sqrt[i] = 1.0 / std::sqrt(w.penalty[i]);
    const Eigen::Matrix<double, 6, kDofs> jw = j * w_inv_sqrt.asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jw, Eigen::ComputeFullU);
    const auto s = svd.singularValues();
    const double lambda = w.damping;
    double gain_max = 0.0;
    for (int i = 0; i < s.size(); ++i) gain_max = std::max(gain_max, s[i] / (s[i] * s[i] + lambda * lambda));

    // Outward twist along the weakest direction: the damped gain is exact there.
    const double sigma_min = s[s.size() - 1];
    Twist v = 0.1 * svd.matrixU().col(s.size() - 1);
    Vector9 rates = dls_rates(j, v, w);
    Vector9 scaled = rates.cwiseQuotient(w_inv_sqrt);
    CHECK(scaled.norm() ==
          doctest::Approx(v.norm() * sigma_min / (sigma_min * sigma_min + lambda * lambda)).epsilon(1e-8));

    v << 0.3, 0.0, 0.0, 0.0, 0.0, 0.0;
    rates = dls_rates(j, v, w);
    scaled = rates.cwiseQuotient(w_inv_sqrt);
    CHECK(scaled.norm() <= v.norm() * gain_max * (1 + 1e-9));
    CHECK(scaled.norm() <= v.norm() / (2 * lambda) * (1 + 1e-9));
  }
}

TEST_CASE("weights: an infinite penalty locks a DoF; validation") {
  const auto model = RobotModel::standard();
  RobotConfiguration c;
  c.arm_q << 0.0, -0.3, 0.9, 0.0, -0.6, 0.0;
  WholeBodyWeights w;
  w.penalty[0] = w.penalty[1] = w.penalty[2] = std::numeric_limits<double>::infinity();
  Twist v;
  v << 0.5, 0.2, 0.0, 0.0, 0.0, 0.0;
  const Vector9 rates = dls_rates(jacobian(c, model), v, w);
  CHECK(rates.head<3>().isZero(0.0));
  CHECK(rates.tail<6>().norm() > 0.0);

  WholeBodyWeights bad;
  bad.penalty[4] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = WholeBodyWeights{};
  bad.damping = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(w.validate());
}

TEST_CASE("project_rates: near-limit components are zeroed only in the limit direction") {
  const auto model = RobotModel::standard();
  RobotConfiguration c;
  c.arm_q << 0.0, -0.3, 0.9, 2.995, -0.6, 0.0;
  Vector9 r = Vector9::Zero();
  r[kBaseDofs + 3] = 1.0;
  CHECK(project_rates(c, r, model, RateProjection{})[kBaseDofs + 3] == 0.0);
  r[kBaseDofs + 3] = -1.0;
  CHECK(project_rates(c, r, model, RateProjection{})[kBaseDofs + 3] == -1.0);
}

TEST_CASE("check_self_collision: initial configurations are clear") {
  const auto model = RobotModel::standard();
  RouterConfig cfg;
  for (auto mode : {ControlMode::EEFront, ControlMode::EETop}) {
    const auto c = initial_configuration(mode, RobotConfiguration{}, cfg);
    CHECK(check_self_collision(c, model).empty());
    CHECK(min_separation(c, model) >= 0.04);
  }
}

TEST_CASE("check_self_collision: wrist inside the trunk is reported") {
  const auto model = RobotModel::standard();
  // Search a folded posture whose wrist capsule center lies inside the trunk proxy.
  bool found = false;
  for (int a = 0; a <= 36 && !found; ++a) {
    for (int b = 0; b <= 29 && !found; ++b) {
      for (int w = 0; w <= 40 && !found; ++w) {
        RobotConfiguration c;
        c.arm_q << 0.0, -2.0 + a * 0.1, -0.2 + b * 0.1, 0.0, -2.0 + w * 0.1, 0.0;
        const auto fk = forward_kinematics_frames(c, model);
        const Eigen::Vector3d center = fk.joint_frames[4] * Eigen::Vector3d(0.1, 0, 0);
        const double to_trunk = segment_distance(center, center, Eigen::Vector3d(-0.3, 0, 0.5),
                                                 Eigen::Vector3d(0.3, 0, 0.5));
        if (to_trunk < 0.1) {
          found = true;
          const auto hits = check_self_collision(c, model);
          const bool has = std::find(hits.begin(), hits.end(), "trunk|wrist") != hits.end();
          CHECK(has);
        }
      }
    }
  }
  CHECK(found);
}

TEST_CASE("check_self_collision: monotone in margin") {
  const auto model = RobotModel::standard();
  std::mt19937_64 gen(24);
  for (int i = 0; i < 2000; ++i) {
    const auto c = random_config(gen, model);
    const auto tight = check_self_collision(c, model, 0.0);
    const auto loose = check_self_collision(c, model, 0.05);
    for (const auto& pair : tight) {
      REQUIRE(std::find(loose.begin(), loose.end(), pair) != loose.end());
    }
  }
}

TEST_CASE("segment_distance: examples") {
  using V = Eigen::Vector3d;
  CHECK(segment_distance(V(0, 0, 0), V(1, 0, 0), V(0, 1, 0), V(1, 1, 0)) == doctest::Approx(1.0));
  CHECK(segment_distance(V(0, 0, 0), V(1, 0, 0), V(0.5, -1, 1), V(0.5, 1, 1)) ==
        doctest::Approx(1.0));
  CHECK(segment_distance(V(0, 0, 0), V(1, 0, 0), V(2, 0, 0), V(3, 0, 0)) == doctest::Approx(1.0));
  CHECK(segment_distance(V(0, 0, 0), V(0, 0, 0), V(1, 1, 0), V(1, 1, 0)) ==
        doctest::Approx(std::sqrt(2.0)));
  // Brute-force sampling never beats the closed form.
  std::mt19937_64 gen(25);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const V p0(u(gen), u(gen), u(gen)), p1(u(gen), u(gen), u(gen));
    const V q0(u(gen), u(gen), u(gen)), q1(u(gen), u(gen), u(gen));
    const double d = segment_distance(p0, p1, q0, q1);
    double brute = 1e9;
    for (int s = 0; s <= 100; ++s) {
      for (int t = 0; t <= 100; ++t) {
        brute = std::min(brute, ((p0 + (p1 - p0) * (s / 100.0)) - (q0 + (q1 - q0) * (t / 100.0))).norm());
      }
    }
    REQUIRE(d <= brute + 1e-12);
    REQUIRE(d >= brute - 0.03);
  }
}

TEST_CASE("integrate_rates: examples") {
  const auto model = RobotModel::standard();
  RobotConfiguration c;
  c.arm_q << 0.1, -0.2, 0.3, 0.0, 0.0, 0.0;
  CHECK(integrate_rates(c, Vector9::Zero(), 0.01, model) == c);

  auto at_limit = c;
  at_limit.arm_q[1] = model.joints[1].upper;
  Vector9 r = Vector9::Zero();
  r[kBaseDofs + 1] = 1.0;
  CHECK(integrate_rates(at_limit, r, 0.01, model).arm_q[1] == model.joints[1].upper);

  r = Vector9::Zero();
  r[kBaseDofs + 2] = 0.3;
  auto stepped = c;
  for (int n = 0; n < 50; ++n) stepped = integrate_rates(stepped, r, 0.01, model);
  CHECK(stepped.arm_q[2] == doctest::Approx(0.3 + 50 * 0.3 * 0.01).epsilon(1e-12));

  r = Vector9::Zero();
  r[2] = 1.0;
  auto spun = c;
  for (int n = 0; n < 1000; ++n) spun = integrate_rates(spun, r, 0.01, model);
  CHECK(spun.base_yaw > -std::numbers::pi);
  CHECK(spun.base_yaw <= std::numbers::pi);
  CHECK(spun.base_yaw == doctest::Approx(normalize_angle(10.0)));

  CHECK_THROWS_AS(integrate_rates(c, r, 0.0, model), ContractError);
}

TEST_CASE("normalize_angle: range and idempotence") {
  CHECK(normalize_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double n = normalize_angle(a);
    REQUIRE(n > -std::numbers::pi);
    REQUIRE(n <= std::numbers::pi);
    REQUIRE(std::abs(std::remainder(n - a, 2 * std::numbers::pi)) < 1e-12);
    REQUIRE(normalize_angle(n) == n);
  }
}

TEST_CASE("servo: converges to reachable targets without self-collision") {
  const auto model = RobotModel::standard();
  std::mt19937_64 gen(26);
  RouterConfig cfg;
  const auto start = initial_configuration(ControlMode::EEFront, RobotConfiguration{}, cfg);
  for (int i = 0; i < 10; ++i) {
    const auto target = random_reachable_target(gen, model);
    const auto r = servo_to(start, target, model);
    INFO("target " << i << " pos err " << r.position_error << " ang err " << r.angle_error);
    CHECK(r.converged);
    CHECK(r.ticks <= 2000);
    CHECK(r.collision_reports == 0);
  }
}

TEST_CASE("servo: equivariant under a common world rotation") {
  const auto model = RobotModel::standard();
  RobotConfiguration c;
  c.base_x = 0.4;
  c.base_y = -0.2;
  c.base_yaw = 0.3;
  c.arm_q << 0.1, -0.3, 1.0, 0.2, -0.5, 0.1;
  EEPose target = forward_kinematics(c, model);
  target.position += Eigen::Vector3d(0.2, 0.15, -0.1);

  const double theta = 0.7;
  const Eigen::AngleAxisd rz(theta, Eigen::Vector3d::UnitZ());
  RobotConfiguration cr = c;
  const Eigen::Vector3d bp = rz * Eigen::Vector3d(c.base_x, c.base_y, 0.0);
  cr.base_x = bp.x();
  cr.base_y = bp.y();
  cr.base_yaw = c.base_yaw + theta;
  EEPose tr;
  tr.position = rz * target.position;
  tr.orientation = Eigen::Quaterniond(rz) * target.orientation;

  const WholeBodyWeights w;
  for (int k = 0; k < 300; ++k) {
    const Twist va = 2.0 * pose_error(forward_kinematics(c, model), target);
    const Twist vb = 2.0 * pose_error(forward_kinematics(cr, model), tr);
    c = integrate_rates(c, solve_whole_body_rates(c, va, w, model), 0.01, model);
    cr = integrate_rates(cr, solve_whole_body_rates(cr, vb, w, model), 0.01, model);
    const auto pa = forward_kinematics(c, model);
    const auto pb = forward_kinematics(cr, model);
    REQUIRE((rz * pa.position - pb.position).norm() < 1e-9);
    REQUIRE((Eigen::Quaterniond(rz) * pa.orientation).angularDistance(pb.orientation) < 1e-9);
  }
}

TEST_CASE("self-collision fuzz: projected teleop rates never enter collision") {
  const auto model = RobotModel::standard();
  std::mt19937_64 gen(27);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RouterConfig cfg;
  auto c = initial_configuration(ControlMode::EEFront, RobotConfiguration{}, cfg);
  Twist v = Twist::Zero();
  int reports = 0;
  for (int step = 0; step < 100000; ++step) {
    if (step % 50 == 0) {
      for (int i = 0; i < 3; ++i) v[i] = 0.15 * u(gen);
      for (int i = 3; i < 6; ++i) v[i] = 0.5 * u(gen);
    }
    c = integrate_rates(c, solve_whole_body_rates(c, v, WholeBodyWeights{}, model), 0.01, model);
    if (!check_self_collision(c, model, 0.0).empty()) ++reports;
  }
  CHECK(reports == 0);
}

TEST_CASE("robot model: json round trip and validation") {
  const auto model = RobotModel::standard();
  const auto back = RobotModel::from_json(model.to_json());
  CHECK(back.joints.size() == 6);
  CHECK(back.proxies.size() == model.proxies.size());
  RobotConfiguration c;
  c.arm_q << 0.3, -0.2, 0.8, 0.1, 0.2, 0.3;
  CHECK((forward_kinematics(c, back).position - forward_kinematics(c, model).position).norm() < 1e-15);

  auto j = model.to_json();
  j["joints"].erase(5);
  CHECK_THROWS_AS(RobotModel::from_json(j), ScenarioError);
  j = model.to_json();
  j["proxies"][0]["frame"] = "nowhere";
  CHECK_THROWS_AS(RobotModel::from_json(j), ScenarioError);
}
