#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadassist/scenario.hpp"
#include "quadassist/world.hpp"

namespace quadassist {

inline constexpr int kEventLogVersion = 1;
inline constexpr const char* kEventLogFormat = "quadassist-eventlog";

struct LogHeader {
  int version = kEventLogVersion;
  std::string scenario_name;
  std::string scenario_version;
  std::string scenario_digest;
  std::string scenario_path;
  std::uint64_t seed = 0;
  double dt = 0.01;
  nlohmann::json tasks = nlohmann::json::array();  // [{name, subgoals: [{id, points}]}]

  nlohmann::json to_json() const;
  static LogHeader from_json(const nlohmann::json& j);  // throws ReplayError
};

LogHeader make_header(const TaskScenario& scenario, std::uint64_t seed,
                      const std::string& scenario_path = {});

struct LogEntry {
  double t = 0.0;
  std::int64_t tick = 0;
  std::string kind;
  nlohmann::json payload;

  nlohmann::json to_json() const;
};

struct EventLog {
  LogHeader header;
  std::vector<LogEntry> entries;
  bool truncated = false;
  std::vector<std::string> warnings;

  /// Number of ticks with a digest line.
  std::int64_t tick_count() const;
};

/// Streams a log as JSON lines: header first, then events and one digest line per tick.
class EventLogWriter {
 public:
  explicit EventLogWriter(std::ostream& out) : out_(&out) {}
  void write_header(const LogHeader& header);
  void write(const LogEntry& entry);
  /// Writes the step's events followed by its "tick" digest line.
  void write_step(std::int64_t tick, double dt, const StepResult& step);

 private:
  std::ostream* out_;
};

/// Parses a log. A damaged final line or a missing "end" event marks the log
/// truncated with a warning; damage elsewhere throws ReplayError.
EventLog read_event_log(std::istream& in);
EventLog read_event_log(const std::filesystem::path& path);

struct ReplayReport {
  std::int64_t ticks_in_log = 0;
  std::int64_t ticks_replayed = 0;
  bool truncated = false;
  std::vector<std::string> warnings;
  std::optional<std::int64_t> first_mismatch_tick;
  std::string mismatch_detail;
  std::string final_digest;

  bool ok() const { return !first_mismatch_tick.has_value(); }
};

/// Re-runs the logged inputs through a fresh world and checks every tick's
/// events and digest. Refuses (ReplayError) on a version or scenario mismatch.
ReplayReport replay_event_log(const EventLog& log, const TaskScenario& scenario,
                              const std::function<void(const SimWorld&)>& on_tick = {});

struct TaskResult {
  std::string name;
  int points = 0;
  int max_points = 0;
  std::optional<double> completion_time;  // s, end of the completing tick
};

struct RaceScore {
  std::vector<TaskResult> tasks;
  int points = 0;
  int max_points = 0;
  std::int64_t total_ticks = 0;
  std::int64_t locomotion_ticks = 0;
  std::int64_t manipulation_ticks = 0;
  std::int64_t idle_ticks = 0;
  double dt = 0.01;
  bool complete = false;

  double total_time() const { return static_cast<double>(total_ticks) * dt; }
  double locomotion_time() const { return static_cast<double>(locomotion_ticks) * dt; }
  double manipulation_time() const { return static_cast<double>(manipulation_ticks) * dt; }
  double idle_time() const { return static_cast<double>(idle_ticks) * dt; }
  /// Share of active (moving or manipulating) time spent moving, in percent.
  double locomotion_percent() const;
  double manipulation_percent() const;

  nlohmann::json to_json() const;
  std::string report() const;
};

/// Points from latched subgoals, times from activity intervals. Throws ScoringError.
RaceScore score_run(const EventLog& log);

}  // namespace quadassist
