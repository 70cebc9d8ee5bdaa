#include "quadassist/safety.hpp"

#include <algorithm>
#include <cmath>

#include "quadassist/errors.hpp"

namespace quadassist {

WrenchReading compute_wrench(const ContactSummary& contact, const WrenchModel& model,
                             DeterministicRng& rng, double timestamp) {
  if (contact.penetration < 0.0) throw ContractError("penetration must be non-negative");
  WrenchReading w;
  w.timestamp = timestamp;
  if (contact.penetration == 0.0) return w;
  w.force = model.stiffness * contact.penetration * contact.normal.normalized();
  if (model.noise_sigma > 0.0) {
    for (int i = 0; i < 3; ++i) w.force[i] += model.noise_sigma * rng.gaussian();
  }
  w.torque = contact.lever.cross(w.force);
  return w;
}

void CollisionThresholds::validate() const {
  if (!(threshold > 0.0)) throw ConfigError("collision threshold must be positive");
  if (!(release_fraction > 0.0 && release_fraction < 1.0)) {
    throw ConfigError("release_fraction must lie in (0, 1)");
  }
}

bool detect_collision(const WrenchReading& wrench, bool was_active,
                      const CollisionThresholds& thresholds) {
  const double f = wrench.force.norm();
  if (was_active) return f >= thresholds.release_fraction * thresholds.threshold;
  return f >= thresholds.threshold;
}

std::optional<FaceTarget> acquire_mouth_target(const HeadPose& head, const CameraModel& camera,
                                               const AcquisitionNoise& noise,
                                               DeterministicRng& rng) {
  const Eigen::Vector3d noise_draw(rng.gaussian(), rng.gaussian(), rng.gaussian());
  const Eigen::Vector3d mouth = head.mouth();
  const Eigen::Vector3d rel = mouth - camera.position;
  const double dist = rel.norm();
  if (dist < camera.min_range || dist > camera.max_range) return std::nullopt;
  const double cos_angle = rel.dot(camera.forward.normalized()) / dist;
  if (cos_angle < std::cos(camera.half_fov)) return std::nullopt;

  FaceTarget t;
  t.confidence = std::clamp(std::exp(-dist / noise.confidence_range) * cos_angle, 0.0, 1.0);
  if (t.confidence < noise.min_confidence) return std::nullopt;
  t.mouth_position = mouth + noise.position_sigma * noise_draw;
  t.measured_distance = (t.mouth_position - camera.position).norm();
  return t;
}

std::optional<FaceTarget> acquire_mouth_target(const HeadPose& head, const CameraModel& camera,
                                               const AcquisitionNoise& noise,
                                               std::uint64_t seed) {
  DeterministicRng rng(seed);
  return acquire_mouth_target(head, camera, noise, rng);
}

std::optional<ApproachPlan> plan_approach(const EEPose& current, const FaceTarget& target,
                                          const ApproachConfig& config,
                                          const ReachabilityCheck& reachable) {
  ApproachPlan plan;
  plan.mouth = target.mouth_position;
  const Eigen::Vector3d offset = current.position - plan.mouth;
  if (offset.norm() < 1e-9) return std::nullopt;
  plan.axis = offset.normalized();
  plan.standoff_point = plan.mouth + plan.axis * config.standoff;
  plan.contact_point = plan.mouth - plan.axis * config.overshoot;

  if (config.standoff > 0.0) {
    plan.waypoints.push_back({plan.standoff_point, config.transit_speed, config.pause_ticks});
  }
  plan.waypoints.push_back({plan.contact_point, config.approach_speed, 0});

  const Eigen::Vector3d& first = plan.waypoints.front().position;
  if (reachable && !reachable(first)) return std::nullopt;
  return plan;
}

std::string_view to_string(FaceTouchPhase p) noexcept {
  switch (p) {
    case FaceTouchPhase::Idle:
      return "Idle";
    case FaceTouchPhase::Acquiring:
      return "Acquiring";
    case FaceTouchPhase::Approaching:
      return "Approaching";
    case FaceTouchPhase::Contact:
      return "Contact";
    case FaceTouchPhase::Retracting:
      return "Retracting";
    case FaceTouchPhase::Done:
      return "Done";
    case FaceTouchPhase::Aborted:
      return "Aborted";
  }
  return "?";
}

bool is_legal_transition(FaceTouchPhase from, FaceTouchPhase to) noexcept {
  using P = FaceTouchPhase;
  switch (from) {
    case P::Idle:
    case P::Done:
    case P::Aborted:
      return to == P::Acquiring;
    case P::Acquiring:
      return to == P::Approaching || to == P::Retracting || to == P::Aborted;
    case P::Approaching:
      return to == P::Contact || to == P::Retracting;
    case P::Contact:
      return to == P::Retracting;
    case P::Retracting:
      return to == P::Done || to == P::Aborted;
  }
  return false;
}

bool FaceTouchPipeline::start() {
  if (is_active(state_.phase)) return false;
  FaceTouchOutput scratch;
  transition(FaceTouchPhase::Acquiring, "", scratch);
  plan_.reset();
  waypoint_ = 0;
  pause_left_ = 0;
  recording_ = false;
  recorded_.clear();
  retrace_index_ = 0;
  retract_stage_ = RetractStage::Retrace;
  pending_abort_.clear();
  acquire_attempts_ = 0;
  dwell_ = 0.0;
  contact_time_ = 0.0;
  touch_success_ = false;
  return true;
}

void FaceTouchPipeline::transition(FaceTouchPhase to, std::string reason, FaceTouchOutput& out) {
  if (!is_legal_transition(state_.phase, to)) {
    throw ContractError("illegal face-touch transition " + std::string(to_string(state_.phase)) +
                        " -> " + std::string(to_string(to)));
  }
  out.transitions.push_back({state_.phase, to, reason});
  state_.phase = to;
  state_.reason = std::move(reason);
}

FaceTouchCommand FaceTouchPipeline::move_toward(const Eigen::Vector3d& from,
                                                const Eigen::Vector3d& to, double speed,
                                                double dt) const {
  FaceTouchCommand cmd;
  cmd.kind = FaceTouchCommandKind::Cartesian;
  const Eigen::Vector3d d = to - from;
  const double dist = d.norm();
  if (dist > 0.0) cmd.linear_velocity = d / dist * std::min(speed, dist / dt);
  return cmd;
}

void FaceTouchPipeline::begin_retract(std::string abort_reason, FaceTouchOutput& out) {
  pending_abort_ = abort_reason;
  transition(FaceTouchPhase::Retracting, std::move(abort_reason), out);
  retrace_index_ = recorded_.size();
  retract_stage_ = RetractStage::Retrace;
}

FaceTouchCommand FaceTouchPipeline::retract_step(const FaceTouchInputs& in,
                                                 FaceTouchOutput& out) {
  const Eigen::Vector3d& p = in.ee.position;
  const double step = config_.retract_speed * in.dt;

  if (retract_stage_ == RetractStage::Retrace) {
    while (retrace_index_ > 1 && (recorded_[retrace_index_ - 1] - p).norm() <= step) {
      --retrace_index_;
    }
    if (retrace_index_ > 0) {
      const Eigen::Vector3d& target = recorded_[retrace_index_ - 1];
      if ((target - p).norm() > config_.waypoint_tolerance) {
        return move_toward(p, target, config_.retract_speed, in.dt);
      }
    }
    retract_stage_ = RetractStage::Retreat;
  }

  if (retract_stage_ == RetractStage::Retreat) {
    if (plan_ && (p - plan_->mouth).norm() < config_.clear_distance) {
      FaceTouchCommand cmd;
      cmd.kind = FaceTouchCommandKind::Cartesian;
      cmd.linear_velocity = plan_->axis * config_.retract_speed;
      return cmd;
    }
    retract_stage_ = RetractStage::Home;
  }

  if (!in.arm_at_home) return {FaceTouchCommandKind::HomeArm, Eigen::Vector3d::Zero()};
  if (pending_abort_.empty()) {
    transition(FaceTouchPhase::Done, "", out);
  } else {
    transition(FaceTouchPhase::Aborted, pending_abort_, out);
  }
  return {};
}

FaceTouchOutput FaceTouchPipeline::step(const FaceTouchInputs& in) {
  FaceTouchOutput out;
  const Eigen::Vector3d& p = in.ee.position;
  FaceTouchCommand hold{FaceTouchCommandKind::Hold, Eigen::Vector3d::Zero()};

  switch (state_.phase) {
    case FaceTouchPhase::Idle:
    case FaceTouchPhase::Done:
    case FaceTouchPhase::Aborted:
      break;

    case FaceTouchPhase::Acquiring:
      if (in.abort_reason) {
        begin_retract(*in.abort_reason, out);
        out.command = hold;
      } else if (in.target) {
        plan_ = plan_approach(in.ee, *in.target, config_.approach, in.reachable);
        if (!plan_) {
          transition(FaceTouchPhase::Aborted, "unreachable", out);
        } else {
          transition(FaceTouchPhase::Approaching, "", out);
          waypoint_ = 0;
          pause_left_ = 0;
          recording_ = plan_->waypoints.size() == 1;
          out.command = hold;
        }
      } else if (++acquire_attempts_ >= config_.acquire_retries) {
        transition(FaceTouchPhase::Aborted, "no target", out);
      } else {
        out.command = hold;
      }
      break;

    case FaceTouchPhase::Approaching:
      if (in.collision_event) {
        transition(FaceTouchPhase::Contact, "force", out);
        begin_retract("collision", out);
        out.command = hold;
      } else if (in.abort_reason) {
        begin_retract(*in.abort_reason, out);
        out.command = hold;
      } else if (in.force_norm >= config_.touch_force_min) {
        transition(FaceTouchPhase::Contact, "", out);
        dwell_ = 0.0;
        contact_time_ = 0.0;
        out.command = hold;
      } else {
        if (recording_) recorded_.push_back(p);
        if (pause_left_ > 0) {
          --pause_left_;
          out.command = hold;
          break;
        }
        const auto& wp = plan_->waypoints[waypoint_];
        if ((wp.position - p).norm() <= config_.waypoint_tolerance) {
          pause_left_ = wp.pause_ticks;
          ++waypoint_;
          out.command = hold;
          if (waypoint_ == plan_->waypoints.size()) {
            // Contact point reached without feeling the face.
            begin_retract("", out);
          } else if (waypoint_ + 1 == plan_->waypoints.size()) {
            recording_ = true;
          }
          break;
        }
        double speed = wp.speed;
        if ((p - plan_->mouth).norm() <= config_.approach.standoff + config_.waypoint_tolerance) {
          speed = std::min(speed, config_.approach.approach_speed);
        }
        out.command = move_toward(p, wp.position, speed, in.dt);
      }
      break;

    case FaceTouchPhase::Contact:
      out.command = hold;
      if (in.collision_event) {
        begin_retract("collision", out);
      } else if (in.abort_reason) {
        begin_retract(*in.abort_reason, out);
      } else {
        contact_time_ += in.dt;
        const bool in_band = in.force_norm >= config_.touch_force_min &&
                             in.force_norm < config_.collision.threshold;
        dwell_ = in_band ? dwell_ + in.dt : 0.0;
        if (dwell_ >= config_.touch_dwell - 1e-9) {
          touch_success_ = true;
          out.touch_succeeded = true;
          begin_retract("", out);
        } else if (contact_time_ >= config_.contact_timeout) {
          begin_retract("", out);
        }
      }
      break;

    case FaceTouchPhase::Retracting:
      if (in.abort_reason && pending_abort_.empty()) {
        pending_abort_ = *in.abort_reason;
        state_.reason = pending_abort_;
      }
      out.command = retract_step(in, out);
      break;
  }
  out.state = state_;
  return out;
}

std::vector<double> FaceTouchPipeline::digest_values() const {
  std::vector<double> v{static_cast<double>(state_.phase),
                        static_cast<double>(waypoint_),
                        static_cast<double>(pause_left_),
                        recording_ ? 1.0 : 0.0,
                        static_cast<double>(recorded_.size()),
                        static_cast<double>(retrace_index_),
                        static_cast<double>(retract_stage_),
                        static_cast<double>(acquire_attempts_),
                        dwell_,
                        contact_time_,
                        touch_success_ ? 1.0 : 0.0};
  if (plan_) {
    for (int i = 0; i < 3; ++i) v.push_back(plan_->mouth[i]);
  }
  return v;
}

}  // namespace quadassist
