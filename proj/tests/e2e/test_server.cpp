#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "quadassist/locomotion.hpp"
#include "quadassist/server.hpp"
#include "quadassist/session.hpp"
#include "scenario_fixtures.hpp"

using namespace quadassist;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;

namespace {

/// Blocking test client.
class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    asio::ip::tcp::resolver resolver(ioc_);
    asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.next_layer().set_option(asio::ip::tcp::no_delay(true));
    ws_.handshake("127.0.0.1", "/");
  }

  nlohmann::json read() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return nlohmann::json::parse(beast::buffers_to_string(buffer.data()));
  }

  /// Reads until a message of the given type arrives; other messages are kept.
  nlohmann::json read_type(const std::string& type) {
    for (;;) {
      auto m = read();
      seen.push_back(m);
      if (m.at("type") == type) return m;
    }
  }

  /// Reads until a state message for at least `tick` arrives.
  nlohmann::json read_state_at(std::int64_t tick) {
    for (;;) {
      auto m = read_type("state");
      if (m.at("payload").at("tick").get<std::int64_t>() >= tick) return m;
    }
  }

  void send(const nlohmann::json& j) { ws_.write(asio::buffer(j.dump())); }
  void send_text(const std::string& text) { ws_.write(asio::buffer(text)); }

  void send_frame(const QuadstickFrame& f, double t = 0.0) {
    send(make_message(MessageType::Frame, t, frame_to_json(f)));
  }

  void close() { ws_.close(websocket::close_code::normal); }

  std::vector<nlohmann::json> seen;

 private:
  asio::io_context ioc_;
  websocket::stream<asio::ip::tcp::socket> ws_;
};

ServerOptions manual_options() {
  ServerOptions o;
  o.port = 0;
  o.clock = ServerClock::Manual;
  return o;
}

void wait_received(const TeleopServer& s, std::uint64_t count) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (s.messages_received() < count && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  REQUIRE(s.messages_received() >= count);
}

void wait_clients(const TeleopServer& s, std::size_t count) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (s.client_count() != count && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  REQUIRE(s.client_count() == count);
}

}  // namespace

TEST_CASE("serve: first connection is the pilot, later ones spectate") {
  TeleopServer server(fixtures::small_scenario(), manual_options());
  const auto port = server.start();
  Client pilot(port);
  const auto cfg = pilot.read_type("config");
  CHECK(cfg.at("payload").at("role") == "pilot");
  CHECK(cfg.at("payload").at("protocol_version") == kProtocolVersion);
  CHECK(cfg.at("payload").at("snapshot_hz") == 30.0);
  CHECK_NOTHROW(validate_message(cfg));
  CHECK(pilot.read_type("state").at("payload").at("tick") == 0);

  Client spectator(port);
  CHECK(spectator.read_type("config").at("payload").at("role") == "spectator");
  QuadstickFrame f;
  f.joystick_h = 1.0;
  spectator.send_frame(f);
  const auto err = spectator.read_type("error");
  CHECK(err.at("payload").at("code") == "not_pilot");
  CHECK(server.messages_received() == 0);
}

TEST_CASE("serve: neutral frames leave the robot stationary") {
  TeleopServer server(fixtures::small_scenario(), manual_options());
  Client pilot(server.start());
  pilot.read_type("config");
  for (int n = 0; n < 30; ++n) {
    pilot.send_frame({});
    wait_received(server, n + 1);
    server.advance(1);
  }
  const auto s = pilot.read_state_at(30);
  CHECK(s.at("payload").at("base").at("x") == 0.0);
  CHECK(s.at("payload").at("base").at("y") == 0.0);
}

TEST_CASE("serve: full forward stick moves the base along the step_base closed form") {
  const auto scenario = fixtures::small_scenario();
  TeleopServer server(scenario, manual_options());
  Client pilot(server.start());
  pilot.read_type("config");
  QuadstickFrame go;
  go.joystick_h = 1.0;
  const auto f = apply_deadzone(go, scenario.config.quadstick.deadzone);
  const BaseTwistCommand cmd{f.joystick_h * scenario.config.router.caps.base_vx, 0.0, 0.0};
  BaseState oracle;
  double last_x = 0.0;
  for (int n = 1; n <= 60; ++n) {
    pilot.send_frame(go);
    wait_received(server, n);
    server.advance(1);
    oracle = step_base(oracle, cmd, scenario.dt, scenario.config.locomotion);
    if (n % 10 == 0) {
      // 30 Hz snapshots from 100 Hz ticks: tick 10 lands in the snapshot after tick 9.
      const auto s = pilot.read_state_at(n);
      const auto tick = s.at("payload").at("tick").get<std::int64_t>();
      const double x = s.at("payload").at("base").at("x").get<double>();
      CHECK(tick == n);
      CHECK(std::abs(x - oracle.x) <= 1e-6);
      CHECK(x > last_x);
      last_x = x;
    }
  }
}

TEST_CASE("serve: malformed frame gets an error and changes nothing") {
  TeleopServer server(fixtures::small_scenario(), manual_options());
  Client pilot(server.start());
  pilot.read_type("config");
  const auto before = server.digest();
  pilot.send_text(
      R"({"type":"frame","t":0,"payload":{"h":1,"v":0,"ch":["n","n","n"],"btn":false,"t":0}})");
  const auto err = pilot.read_type("error");
  CHECK(err.at("payload").at("code") == "bad_message");
  CHECK(err.at("payload").at("message").get<std::string>().find("payload.ch") != std::string::npos);
  CHECK(server.digest() == before);
  CHECK(server.messages_received() == 0);
  // Session continues: a good frame is still accepted.
  pilot.send_frame({});
  wait_received(server, 1);
  server.advance(4);  // first 30 Hz snapshot slot after tick 0
  CHECK(pilot.read_state_at(4).at("payload").at("base").at("x") == 0.0);
}

TEST_CASE("serve: snapshots are decimated to 30 Hz with increasing ticks") {
  TeleopServer server(fixtures::small_scenario(), manual_options());
  Client pilot(server.start());
  pilot.read_type("config");
  pilot.read_type("state");  // initial snapshot on connect
  server.advance(100);
  std::vector<std::int64_t> ticks;
  while (ticks.empty() || ticks.back() < 100) {
    ticks.push_back(pilot.read_type("state").at("payload").at("tick").get<std::int64_t>());
  }
  CHECK(ticks.size() == 30);
  for (std::size_t i = 1; i < ticks.size(); ++i) CHECK(ticks[i] > ticks[i - 1]);
}

TEST_CASE("serve: events are streamed with their tick") {
  TeleopServer server(fixtures::small_scenario(), manual_options());
  Client pilot(server.start());
  pilot.read_type("config");
  pilot.send(make_message(MessageType::Transcript, 0.0, {{"text", "xyzzy"}}));
  wait_received(server, 1);
  server.advance(1);
  for (;;) {
    const auto e = pilot.read_type("event");
    CHECK_NOTHROW(validate_message(e));
    if (e.at("payload").at("kind") == "voice") {
      CHECK(e.at("payload").at("tick") == 0);
      CHECK(e.at("payload").at("payload").at("note") == "no command matched");
      break;
    }
  }
}

TEST_CASE("serve: pilot disconnect zeroes commands and frees the pilot seat") {
  TeleopServer server(fixtures::small_scenario(), manual_options());
  const auto port = server.start();
  {
    Client pilot(port);
    pilot.read_type("config");
    QuadstickFrame go;
    go.joystick_h = 1.0;
    pilot.send_frame(go);
    wait_received(server, 1);
    server.advance(5);
    pilot.close();
  }
  wait_clients(server, 0);
  server.advance(50);  // zero command; the base brakes within its acceleration limit
  Client next(port);
  CHECK(next.read_type("config").at("payload").at("role") == "pilot");
  const auto s1 = next.read_type("state");
  server.advance(5);
  const auto s2 = next.read_state_at(s1.at("payload").at("tick").get<std::int64_t>() + 5);
  CHECK(s2.at("payload").at("base").at("x") == s1.at("payload").at("base").at("x"));
}

TEST_CASE("serve: served and headless runs of the same inputs have identical digests") {
  auto j = fixtures::small_world();
  j["world"]["duration"] = 4.0;
  const auto scenario = scenario_from_json(j);

  PilotScript script;
  QuadstickFrame a;
  a.joystick_h = 0.6;
  a.joystick_v = -0.3;
  QuadstickFrame b;
  b.channels[kModeSwitchChannel] = BreathState::Suck;
  QuadstickFrame c;
  c.joystick_v = 1.0;
  c.channels[kThirdAxisChannel] = BreathState::Blow;
  script.entries = {{0.0, a, std::nullopt},
                    {1.0, b, std::nullopt},
                    {1.2, c, std::nullopt},
                    {2.5, std::nullopt, std::string("stop")},
                    {2.6, QuadstickFrame{}, std::nullopt}};
  const auto headless = run_headless(scenario, script);

  TeleopServer server(scenario, manual_options());
  Client pilot(server.start());
  pilot.read_type("config");
  QuadstickFrame held;
  std::size_t next = 0;
  std::uint64_t sent = 0;
  for (std::int64_t tick = 0; !server.finished(); ++tick) {
    while (next < script.entries.size() && std::llround(script.entries[next].t / 0.01) <= tick) {
      const auto& e = script.entries[next++];
      if (e.frame) held = *e.frame;
      if (e.transcript) {
        pilot.send(make_message(MessageType::Transcript, 0.0, {{"text", *e.transcript}}));
        ++sent;
      }
    }
    pilot.send_frame(held);  // a console streams its current state every tick
    ++sent;
    wait_received(server, sent);
    server.advance(1);
  }
  CHECK(server.tick() == headless.ticks);
  CHECK(server.digest() == headless.final_digest);
  const auto served = server.score();
  CHECK(served.locomotion_ticks == headless.score.locomotion_ticks);
  CHECK(served.manipulation_ticks == headless.score.manipulation_ticks);
}

TEST_CASE("serve: a busy port is a startup error") {
  TeleopServer first(fixtures::small_scenario(), manual_options());
  const auto port = first.start();
  auto o = manual_options();
  o.port = port;
  TeleopServer second(fixtures::small_scenario(), o);
  CHECK_THROWS(second.start());
}
