// Command-line front end: headless runs, the teleop server, replay and
// pilot-script generation.

#include <csignal>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "quadassist/autopilot.hpp"
#include "quadassist/errors.hpp"
#include "quadassist/event_log.hpp"
#include "quadassist/scenario.hpp"
#include "quadassist/server.hpp"
#include "quadassist/session.hpp"

namespace {

quadassist::TeleopServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void print_score(const quadassist::RaceScore& score, bool json) {
  if (json) {
    std::cout << score.to_json().dump() << '\n';
  } else {
    std::cout << score.report();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated assistive quadruped-arm teleoperation"};
  std::string scenario_path;
  std::optional<std::uint16_t> serve_port;
  std::string script_path;
  std::string record_path;
  std::string replay_path;
  std::string generate_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> duration;
  double snapshot_hz = 30.0;
  std::string address = "127.0.0.1";
  bool json = false;

  app.add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  auto* serve = app.add_option("--serve", serve_port, "Serve a WebSocket session on this port");
  auto* script = app.add_option("--script", script_path, "Run headless with this pilot script")
                     ->check(CLI::ExistingFile);
  app.add_option("--record", record_path, "Write the event log here");
  auto* replay = app.add_option("--replay", replay_path, "Replay and verify an event log")
                     ->check(CLI::ExistingFile);
  auto* generate = app.add_option("--generate-script", generate_path,
                                  "Drive the run with the built-in autopilot and save its script");
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--dt", dt, "Override the tick length in seconds")->check(CLI::PositiveNumber);
  app.add_option("--duration", duration, "Override the run duration in seconds")
      ->check(CLI::PositiveNumber);
  app.add_option("--snapshot-hz", snapshot_hz, "State snapshot rate when serving")
      ->check(CLI::PositiveNumber);
  app.add_option("--address", address, "Listen address when serving");
  app.add_flag("--json", json, "Print the score as JSON");
  serve->excludes(script)->excludes(replay)->excludes(generate);
  script->excludes(replay)->excludes(generate);
  replay->excludes(generate);
  CLI11_PARSE(app, argc, argv);

  using namespace quadassist;
  try {
    TaskScenario scenario = load_scenario(scenario_path);
    if (dt) scenario.dt = *dt;
    if (duration) scenario.duration = *duration;
    std::optional<std::filesystem::path> record;
    if (!record_path.empty()) record = record_path;

    if (!replay_path.empty()) {
      const auto log = read_event_log(std::filesystem::path(replay_path));
      const auto report = replay_event_log(log, scenario);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "replayed " << report.ticks_replayed << " of " << report.ticks_in_log
                << " ticks\n";
      if (!report.ok()) {
        std::cout << "MISMATCH at tick " << *report.first_mismatch_tick << ": "
                  << report.mismatch_detail << '\n';
        return 1;
      }
      std::cout << "digest " << report.final_digest << " matches\n";
      print_score(score_run(log), json);
      return 0;
    }

    if (!generate_path.empty()) {
      std::string failure;
      const auto generated = generate_pilot_script(scenario, seed, &failure);
      generated.save(generate_path);
      if (!failure.empty()) {
        std::cerr << "autopilot: " << failure << '\n';
        return 1;
      }
      const auto result = run_headless(scenario, generated, {seed, record, scenario_path});
      std::cout << "wrote " << generated.entries.size() << " entries to " << generate_path << '\n';
      print_score(result.score, json);
      return result.score.complete ? 0 : 1;
    }

    if (serve_port) {
      ServerOptions options;
      options.address = address;
      options.port = *serve_port;
      options.snapshot_hz = snapshot_hz;
      options.seed = seed;
      options.record = record;
      options.scenario_path = scenario_path;
      TeleopServer server(std::move(scenario), options);
      const auto port = server.start();
      std::cout << "listening on ws://" << address << ':' << port << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
      print_score(server.score(), json);
      std::cout << "digest " << server.digest() << '\n';
      return 0;
    }

    if (!script_path.empty()) {
      const auto pilot = PilotScript::load(script_path);
      const auto result = run_headless(scenario, pilot, {seed, record, scenario_path});
      print_score(result.score, json);
      if (!json) std::cout << "digest " << result.final_digest << '\n';
      return 0;
    }

    std::cout << scenario_summary(scenario).dump(2) << '\n';
    return 0;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario: " << e.what() << '\n';
  } catch (const ScriptError& e) {
    std::cerr << "script: " << e.what() << '\n';
  } catch (const ReplayError& e) {
    std::cerr << "replay refused: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 2;
}
