#include "quadassist/quadstick.hpp"

#include <algorithm>
#include <cmath>

#include "quadassist/errors.hpp"

namespace quadassist {

char breath_code(BreathState s) noexcept {
  switch (s) {
    case BreathState::Blow:
      return 'b';
    case BreathState::Suck:
      return 's';
    case BreathState::Neutral:
      break;
  }
  return 'n';
}

BreathState breath_from_code(std::string_view code) {
  if (code == "n") return BreathState::Neutral;
  if (code == "b") return BreathState::Blow;
  if (code == "s") return BreathState::Suck;
  throw DecodeError("channels", "unknown channel value '" + std::string(code) + "'");
}

std::string_view to_string(BreathState s) noexcept {
  switch (s) {
    case BreathState::Blow:
      return "Blow";
    case BreathState::Suck:
      return "Suck";
    case BreathState::Neutral:
      break;
  }
  return "Neutral";
}

std::string_view to_string(MappingMode m) noexcept {
  return m == MappingMode::Primary ? "Primary" : "Secondary";
}

QuadstickFrame decode_frame(const RawReport& raw) {
  if (raw.axes.size() != 2) {
    throw DecodeError("axes", "expected 2, got " + std::to_string(raw.axes.size()));
  }
  if (raw.channels.size() != kChannelCount) {
    throw DecodeError("channels", "expected 4, got " + std::to_string(raw.channels.size()));
  }
  if (!raw.button) throw DecodeError("btn", "missing");
  if (!raw.timestamp) throw DecodeError("t", "missing");
  if (!std::isfinite(*raw.timestamp)) throw DecodeError("t", "non-finite value");

  static constexpr std::array<const char*, 2> kAxisNames{"h", "v"};
  QuadstickFrame frame;
  std::array<double, 2> axes{};
  for (std::size_t i = 0; i < 2; ++i) {
    if (!std::isfinite(raw.axes[i])) throw DecodeError(kAxisNames[i], "non-finite value");
    axes[i] = std::clamp(raw.axes[i], -1.0, 1.0);
  }
  frame.joystick_h = axes[0];
  frame.joystick_v = axes[1];
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    frame.channels[i] = breath_from_code(raw.channels[i]);
  }
  frame.push_button = *raw.button;
  frame.timestamp = *raw.timestamp;
  return frame;
}

namespace {

double number_field(const nlohmann::json& message, const char* key) {
  auto it = message.find(key);
  if (it == message.end()) throw DecodeError(key, "missing");
  if (!it->is_number()) throw DecodeError(key, "expected a number");
  return it->get<double>();
}

}  // namespace

RawReport raw_report_from_json(const nlohmann::json& message) {
  if (!message.is_object()) throw DecodeError("frame", "expected an object");
  RawReport raw;
  raw.axes = {number_field(message, "h"), number_field(message, "v")};

  auto ch = message.find("ch");
  if (ch == message.end()) throw DecodeError("channels", "missing");
  if (!ch->is_array()) throw DecodeError("channels", "expected an array");
  for (const auto& c : *ch) {
    if (!c.is_string()) throw DecodeError("channels", "expected strings");
    raw.channels.push_back(c.get<std::string>());
  }

  auto btn = message.find("btn");
  if (btn != message.end()) {
    if (!btn->is_boolean()) throw DecodeError("btn", "expected a boolean");
    raw.button = btn->get<bool>();
  }
  if (message.contains("t")) raw.timestamp = number_field(message, "t");
  return raw;
}

QuadstickFrame decode_frame(const nlohmann::json& message) {
  return decode_frame(raw_report_from_json(message));
}

nlohmann::json frame_to_json(const QuadstickFrame& frame) {
  nlohmann::json ch = nlohmann::json::array();
  for (auto c : frame.channels) ch.push_back(std::string(1, breath_code(c)));
  return {{"h", frame.joystick_h},
          {"v", frame.joystick_v},
          {"ch", std::move(ch)},
          {"btn", frame.push_button},
          {"t", frame.timestamp}};
}

QuadstickFrame apply_deadzone(const QuadstickFrame& frame, double deadzone) {
  if (!(deadzone >= 0.0 && deadzone < 1.0)) {
    throw ConfigError("deadzone must lie in [0, 1)");
  }
  auto shape = [deadzone](double x) {
    const double mag = std::abs(x);
    if (mag < deadzone) return 0.0;
    return std::copysign((mag - deadzone) / (1.0 - deadzone), x);
  };
  QuadstickFrame out = frame;
  out.joystick_h = shape(frame.joystick_h);
  out.joystick_v = shape(frame.joystick_v);
  return out;
}

MappingModeState update_mapping_mode(const MappingModeState& state,
                                     const QuadstickFrame& frame, double now,
                                     double switch_latency) {
  MappingModeState next = state;
  const BreathState channel = frame.channels[kMappingSwitchChannel];

  if (next.pending && now - *next.transition_started_at >= switch_latency) {
    next.current = *next.pending;
    next.pending.reset();
    next.transition_started_at.reset();
  }

  const bool blow_edge =
      state.last_switch_channel == BreathState::Neutral && channel == BreathState::Blow;
  if (blow_edge && !next.pending) {
    next.pending = next.current == MappingMode::Primary ? MappingMode::Secondary
                                                        : MappingMode::Primary;
    next.transition_started_at = now;
  }
  next.last_switch_channel = channel;
  return next;
}

bool FrameStreamValidator::accept(const QuadstickFrame& frame) {
  if (last_ && frame.timestamp < *last_) return false;
  last_ = frame.timestamp;
  return true;
}

}  // namespace quadassist
