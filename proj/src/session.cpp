#include "quadassist/session.hpp"

#include <cmath>
#include <fstream>

#include "quadassist/errors.hpp"

namespace quadassist {

// --- scripted pilot -----------------------------------------------------------

void PilotScript::validate(double duration) const {
  double prev = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string where = "script entry " + std::to_string(i);
    if (!std::isfinite(e.t) || e.t < 0.0) throw ScriptError(where + ": t must be finite and >= 0");
    if (e.t < prev) throw ScriptError(where + ": time goes backwards");
    if (e.t > duration) {
      throw ScriptError(where + ": t = " + std::to_string(e.t) +
                        " is beyond the scenario duration " + std::to_string(duration));
    }
    if (e.frame.has_value() == e.transcript.has_value()) {
      throw ScriptError(where + ": needs exactly one of frame or transcript");
    }
    prev = e.t;
  }
}

PilotScript PilotScript::from_jsonl(std::istream& in) {
  PilotScript script;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "script line " + std::to_string(number);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ScriptError(where + ": " + e.what());
    }
    if (j.contains("format")) continue;  // header line
    ScriptEntry e;
    try {
      e.t = j.at("t").get<double>();
      if (j.contains("frame")) {
        auto f = j.at("frame");
        if (f.is_object() && !f.contains("t")) f["t"] = e.t;  // frames take the entry time
        e.frame = decode_frame(f);
      }
      if (j.contains("transcript")) e.transcript = j.at("transcript").get<std::string>();
    } catch (const DecodeError& ex) {
      throw ScriptError(where + ": frame." + ex.what());
    } catch (const nlohmann::json::exception& ex) {
      throw ScriptError(where + ": " + ex.what());
    }
    if (e.frame) e.frame->timestamp = e.t;
    script.entries.push_back(std::move(e));
  }
  return script;
}

PilotScript PilotScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError("cannot open script '" + path.string() + "'");
  return from_jsonl(in);
}

void PilotScript::to_jsonl(std::ostream& out) const {
  out << nlohmann::json{{"format", "quadassist-script"}, {"version", 1}}.dump() << '\n';
  for (const auto& e : entries) {
    nlohmann::json j{{"t", e.t}};
    if (e.frame) {
      auto f = frame_to_json(*e.frame);
      f.erase("t");
      j["frame"] = f;
    } else {
      j["transcript"] = e.transcript.value_or("");
    }
    out << j.dump() << '\n';
  }
}

void PilotScript::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ScriptError("cannot write script '" + path.string() + "'");
  to_jsonl(out);
}

HeadlessResult run_headless(const TaskScenario& scenario, const PilotScript& script,
                            const HeadlessOptions& options) {
  script.validate(scenario.duration);
  SimWorld world(scenario, options.seed);
  std::stringstream log;
  EventLogWriter writer(log);
  writer.write_header(make_header(scenario, world.seed(), options.scenario_path));

  QuadstickFrame frame;
  std::size_t next = 0;
  std::string digest;
  const auto& entries = script.entries;
  while (!world.finished()) {
    const std::int64_t tick = world.state().tick_index;
    std::vector<std::string> transcripts;
    while (next < entries.size() &&
           std::llround(entries[next].t / scenario.dt) <= tick) {
      if (entries[next].frame) frame = *entries[next].frame;
      if (entries[next].transcript) transcripts.push_back(*entries[next].transcript);
      ++next;
    }
    const auto result = world.step(frame, transcripts);
    writer.write_step(tick, scenario.dt, result);
    digest = result.digest;
  }

  if (options.record) {
    std::ofstream out(*options.record, std::ios::binary);
    if (!out) throw ScriptError("cannot write event log '" + options.record->string() + "'");
    out << log.str();
  }
  HeadlessResult r;
  log.seekg(0);
  r.log = read_event_log(log);
  r.score = score_run(r.log);
  r.final_digest = digest;
  r.ticks = world.state().tick_index;
  return r;
}

// --- teleop safety ------------------------------------------------------------

FailsafeDecision frame_gap_failsafe(double last_frame_age, double timeout) {
  if (!(timeout > 0.0)) throw ContractError("frame_gap_failsafe: timeout must be positive");
  return last_frame_age >= timeout ? FailsafeDecision::Zero : FailsafeDecision::Hold;
}

// --- session messages -----------------------------------------------------------

std::string_view to_string(MessageType t) noexcept {
  switch (t) {
    case MessageType::Frame:
      return "frame";
    case MessageType::Transcript:
      return "transcript";
    case MessageType::State:
      return "state";
    case MessageType::Event:
      return "event";
    case MessageType::Config:
      return "config";
    case MessageType::Error:
      return "error";
  }
  return "?";
}

namespace {

MessageType message_type(const nlohmann::json& j) {
  if (!j.is_object()) throw ProtocolError("message: expected a json object");
  const auto it = j.find("type");
  if (it == j.end() || !it->is_string()) throw ProtocolError("type: missing");
  const auto s = it->get<std::string>();
  for (auto t : {MessageType::Frame, MessageType::Transcript, MessageType::State,
                 MessageType::Event, MessageType::Config, MessageType::Error}) {
    if (s == to_string(t)) return t;
  }
  throw ProtocolError("type: unknown message type '" + s + "'");
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ProtocolError(path + key + ": missing");
  return obj.at(key);
}

void require_number(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!require(obj, key, path).is_number()) throw ProtocolError(path + key + ": expected a number");
}

void require_string(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!require(obj, key, path).is_string()) throw ProtocolError(path + key + ": expected a string");
}

}  // namespace

void validate_message(const nlohmann::json& m) {
  const auto type = message_type(m);
  require_number(m, "t", "");
  const auto& p = require(m, "payload", "");
  if (!p.is_object()) throw ProtocolError("payload: expected an object");
  switch (type) {
    case MessageType::Frame:
      try {
        decode_frame(p);
      } catch (const DecodeError& e) {
        throw ProtocolError(std::string("payload.") + e.what());
      }
      break;
    case MessageType::Transcript:
      require_string(p, "text", "payload.");
      break;
    case MessageType::State:
      require_number(p, "tick", "payload.");
      require_number(p, "t", "payload.");
      require(p, "base", "payload.");
      require(p, "arm_q", "payload.");
      require_string(p, "control_mode", "payload.");
      require(p, "mapping", "payload.");
      require(p, "face_touch", "payload.");
      break;
    case MessageType::Event:
      require_number(p, "tick", "payload.");
      require_string(p, "kind", "payload.");
      require(p, "payload", "payload.");
      break;
    case MessageType::Config:
      require_number(p, "protocol_version", "payload.");
      require_string(p, "role", "payload.");
      require(p, "scenario", "payload.");
      require_number(p, "dt", "payload.");
      require_number(p, "snapshot_hz", "payload.");
      break;
    case MessageType::Error:
      require_string(p, "code", "payload.");
      require_string(p, "message", "payload.");
      break;
  }
}

ClientMessage parse_client_message(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("message: not valid json: ") + e.what());
  }
  // Flat transcript form {"type":"transcript","text":...,"t":...} is accepted too.
  if (j.is_object() && j.value("type", "") == "transcript" && j.contains("text") &&
      !j.contains("payload")) {
    j["payload"] = {{"text", j["text"]}};
    j.erase("text");
  }
  validate_message(j);
  ClientMessage m;
  m.type = message_type(j);
  if (m.type == MessageType::Frame) {
    m.frame = decode_frame(j.at("payload"));
  } else if (m.type == MessageType::Transcript) {
    m.transcript = j.at("payload").at("text").get<std::string>();
  } else {
    throw ProtocolError("type: '" + std::string(to_string(m.type)) +
                        "' messages are sent by the server only");
  }
  return m;
}

nlohmann::json make_message(MessageType type, double t, nlohmann::json payload) {
  return {{"type", to_string(type)}, {"t", t}, {"payload", std::move(payload)}};
}

nlohmann::json config_message(const TaskScenario& scenario, std::string_view role,
                              double snapshot_hz) {
  return make_message(MessageType::Config, 0.0,
                      {{"protocol_version", kProtocolVersion},
                       {"role", role},
                       {"scenario", scenario_summary(scenario)},
                       {"dt", scenario.dt},
                       {"snapshot_hz", snapshot_hz},
                       {"frame_timeout", scenario.config.frame_timeout},
                       {"deadzone", scenario.config.quadstick.deadzone},
                       {"caps", {{"base_vx", scenario.config.router.caps.base_vx},
                                 {"base_vy", scenario.config.router.caps.base_vy},
                                 {"base_wyaw", scenario.config.router.caps.base_wyaw},
                                 {"ee_linear", scenario.config.router.caps.ee_linear},
                                 {"ee_angular", scenario.config.router.caps.ee_angular}}},
                       {"locomotion", {{"max_speed", scenario.config.locomotion.max_speed},
                                       {"yaw_rate_cap", scenario.config.locomotion.yaw_rate_cap},
                                       {"linear_accel", scenario.config.locomotion.linear_accel},
                                       {"yaw_accel", scenario.config.locomotion.yaw_accel}}}});
}

nlohmann::json state_message(const nlohmann::json& snapshot) {
  return make_message(MessageType::State, snapshot.at("t").get<double>(), snapshot);
}

nlohmann::json event_message(std::int64_t tick, double t, const WorldEvent& event) {
  return make_message(MessageType::Event, t,
                      {{"tick", tick}, {"kind", event.kind}, {"payload", event.payload}});
}

nlohmann::json error_message(double t, std::string_view code, std::string_view text) {
  return make_message(MessageType::Error, t, {{"code", code}, {"message", text}});
}

// --- live session core ------------------------------------------------------------

SessionCore::SessionCore(TaskScenario scenario, SessionOptions options)
    : world_(std::move(scenario), options.seed) {
  if (options.record) {
    record_ = std::make_unique<std::ofstream>(*options.record, std::ios::binary);
    if (!*record_) throw ScriptError("cannot write event log '" + options.record->string() + "'");
  }
  std::ostringstream chunk;
  EventLogWriter(chunk).write_header(
      make_header(world_.scenario(), world_.seed(), options.scenario_path));
  append_log(chunk.str());
}

SessionCore::~SessionCore() {
  if (record_) record_->flush();
}

void SessionCore::push_frame(const QuadstickFrame& frame) {
  std::lock_guard lock(mutex_);
  pending_.frame = frame;
}

void SessionCore::push_transcript(std::string text) {
  std::lock_guard lock(mutex_);
  pending_.transcripts.push_back(std::move(text));
}

void SessionCore::set_pilot_connected(bool connected) {
  std::lock_guard lock(mutex_);
  pilot_connected_ = connected;
}

StepResult SessionCore::tick() {
  Pending in;
  bool connected;
  {
    std::lock_guard lock(mutex_);
    in = std::move(pending_);
    pending_ = {};
    connected = pilot_connected_;
  }
  const std::int64_t tick = world_.state().tick_index;
  const double dt = world_.scenario().dt;
  if (in.frame) {
    held_frame_ = *in.frame;
    last_frame_tick_ = tick;
    failsafe_active_ = false;
  } else if (last_frame_tick_ >= 0) {
    // A vanished pilot zeroes at once; a silent one after the frame timeout.
    const double age = static_cast<double>(tick - last_frame_tick_) * dt;
    if (!connected || frame_gap_failsafe(age, world_.scenario().config.frame_timeout) ==
                          FailsafeDecision::Zero) {
      held_frame_ = QuadstickFrame{};
      failsafe_active_ = true;
    }
  }
  auto result = world_.step(held_frame_, in.transcripts);
  std::ostringstream chunk;
  EventLogWriter(chunk).write_step(tick, dt, result);
  append_log(chunk.str());
  return result;
}

void SessionCore::append_log(const std::string& text) {
  log_ << text;
  if (record_) {
    *record_ << text;
    record_->flush();
  }
}

}  // namespace quadassist
