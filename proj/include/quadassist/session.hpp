#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadassist/event_log.hpp"
#include "quadassist/quadstick.hpp"
#include "quadassist/scenario.hpp"
#include "quadassist/world.hpp"

namespace quadassist {

inline constexpr int kProtocolVersion = 1;

// --- scripted pilot -----------------------------------------------------------

struct ScriptEntry {
  double t = 0.0;
  std::optional<QuadstickFrame> frame;
  std::optional<std::string> transcript;
};

/// Timed frames and transcripts standing in for the pilot. Frames are held
/// until the next frame entry.
struct PilotScript {
  std::vector<ScriptEntry> entries;

  /// Non-decreasing times, each entry a frame or a transcript, all within
  /// duration. Throws ScriptError.
  void validate(double duration) const;

  static PilotScript from_jsonl(std::istream& in);  // throws ScriptError
  static PilotScript load(const std::filesystem::path& path);
  void to_jsonl(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
};

struct HeadlessOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> record;
  std::string scenario_path;
};

struct HeadlessResult {
  RaceScore score;
  std::string final_digest;
  std::int64_t ticks = 0;
  EventLog log;
};

/// Runs the script to completion (all subgoals or the scenario duration).
HeadlessResult run_headless(const TaskScenario& scenario, const PilotScript& script,
                            const HeadlessOptions& options = {});

// --- teleop safety ------------------------------------------------------------

enum class FailsafeDecision : std::uint8_t { Hold, Zero };

/// Hold the last frame while it is fresh, zero all commands once it is older
/// than timeout. Throws ContractError unless timeout > 0.
FailsafeDecision frame_gap_failsafe(double last_frame_age, double timeout);

// --- session messages -----------------------------------------------------------

enum class MessageType : std::uint8_t { Frame, Transcript, State, Event, Config, Error };
std::string_view to_string(MessageType t) noexcept;

struct ClientMessage {
  MessageType type = MessageType::Frame;
  std::optional<QuadstickFrame> frame;
  std::string transcript;
};

/// Parses and validates a pilot-to-server message. Throws ProtocolError naming
/// the offending field.
ClientMessage parse_client_message(std::string_view text);

/// Validates any message against its tagged schema. Throws ProtocolError.
void validate_message(const nlohmann::json& message);

nlohmann::json make_message(MessageType type, double t, nlohmann::json payload);
nlohmann::json config_message(const TaskScenario& scenario, std::string_view role,
                              double snapshot_hz);
nlohmann::json state_message(const nlohmann::json& snapshot);
nlohmann::json event_message(std::int64_t tick, double t, const WorldEvent& event);
nlohmann::json error_message(double t, std::string_view code, std::string_view text);

// --- live session core ------------------------------------------------------------

struct SessionOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> record;
  std::string scenario_path;
};

/// The single stepping context of a served run. Network code pushes inputs
/// through the thread-safe queue; tick() drains it at the tick boundary.
class SessionCore {
 public:
  explicit SessionCore(TaskScenario scenario, SessionOptions options = {});
  ~SessionCore();

  // Ingress; safe from any thread.
  void push_frame(const QuadstickFrame& frame);
  void push_transcript(std::string text);
  void set_pilot_connected(bool connected);

  // Stepping context only.
  StepResult tick();
  const SimWorld& world() const noexcept { return world_; }
  bool finished() const { return world_.finished(); }
  bool failsafe_active() const noexcept { return failsafe_active_; }
  /// Whole log text so far (header included).
  std::string log_text() const { return log_.str(); }

 private:
  struct Pending {
    std::optional<QuadstickFrame> frame;
    std::vector<std::string> transcripts;
  };

  SimWorld world_;
  std::mutex mutex_;
  Pending pending_;
  bool pilot_connected_ = false;

  QuadstickFrame held_frame_;
  std::int64_t last_frame_tick_ = -1;
  bool failsafe_active_ = false;

  void append_log(const std::string& text);

  std::ostringstream log_;
  std::unique_ptr<std::ofstream> record_;
};

}  // namespace quadassist
