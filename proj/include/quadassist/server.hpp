#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "quadassist/event_log.hpp"
#include "quadassist/scenario.hpp"

namespace quadassist {

enum class ServerClock : std::uint8_t {
  Realtime,  // one tick per dt of wall time
  Manual     // ticks only on advance(); for tests and lockstep tools
};

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  double snapshot_hz = 30.0;
  ServerClock clock = ServerClock::Realtime;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> record;
  std::string scenario_path;
};

/// WebSocket teleoperation server. The first connected client is the pilot,
/// later ones are spectators. Inputs are queued and applied at the next tick
/// boundary; state snapshots go out at snapshot_hz, events every tick.
class TeleopServer {
 public:
  TeleopServer(TaskScenario scenario, ServerOptions options);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts serving; returns the bound port.
  std::uint16_t start();
  /// Realtime clock: blocks until the run finishes or stop() is called.
  void run();
  /// Manual clock: steps up to n ticks (fewer if the run finishes).
  std::int64_t advance(std::int64_t n = 1);
  void stop();

  std::uint16_t port() const noexcept;
  bool finished() const;
  std::int64_t tick() const;
  std::string digest() const;
  /// Pilot frames and transcripts accepted so far.
  std::uint64_t messages_received() const;
  std::size_t client_count() const;
  /// Score of the run so far, from the session's own event log.
  RaceScore score() const;
  std::string log_text() const;

  struct Impl;  // opaque; defined with the network code

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace quadassist
