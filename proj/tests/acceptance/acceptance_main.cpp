// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "face_touch_harness.hpp"
#include "kinematics_oracle.hpp"
#include "quadassist/control_router.hpp"
#include "quadassist/event_log.hpp"
#include "quadassist/locomotion.hpp"
#include "quadassist/session.hpp"
#include "quadassist/voice.hpp"
#include "quadassist/world.hpp"
#include "scenario_fixtures.hpp"
#include "servo_harness.hpp"
#include "axis_table_oracle.hpp"

using namespace quadassist;
using namespace quadassist::testing;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

constexpr BreathState kStates[] = {BreathState::Neutral, BreathState::Blow, BreathState::Suck};
constexpr ControlMode kModes[] = {ControlMode::BaseControl, ControlMode::EEFront,
                                  ControlMode::EETop};

Outcome axis_table_routing() {
  Outcome o;
  const RateCaps caps;
  int cells = 0;
  for (auto mode : kModes) {
    for (auto mapping : {MappingMode::Primary, MappingMode::Secondary}) {
      for (int hs = -1; hs <= 1; ++hs) {
        for (int vs = -1; vs <= 1; ++vs) {
          for (int c1 = -1; c1 <= 1; ++c1) {
            for (auto grip : kStates) {
              QuadstickFrame f;
              f.joystick_h = hs;
              f.joystick_v = vs;
              f.channels[kThirdAxisChannel] =
                  c1 > 0 ? BreathState::Blow : (c1 < 0 ? BreathState::Suck : BreathState::Neutral);
              f.channels[kGripperChannel] = grip;
              const auto got = route_axes(f, mode, mapping, caps);
              const auto want = expected_command(mode, mapping, hs, vs, c1, caps);
              if (as_array(got) != want) {
                o.fail("cell mode=" + std::string(to_string(mode)) + " h=" + std::to_string(hs) +
                       " v=" + std::to_string(vs) + " ch1=" + std::to_string(c1));
              }
              const auto grip_want = grip == BreathState::Blow   ? GripperAction::Open
                                     : grip == BreathState::Suck ? GripperAction::Close
                                                                 : GripperAction::Hold;
              if (got.gripper != grip_want) o.fail("gripper channel");
              if (mode == ControlMode::BaseControl && mapping == MappingMode::Secondary &&
                  c1 == 0 && !got.motion_is_zero()) {
                o.fail("Base/Secondary row is not unmapped");
              }
              ++cells;
            }
          }
        }
      }
    }
  }
  if (o.ok) o.detail = std::to_string(cells) + " cells agree";
  return o;
}

Outcome speed_cap() {
  Outcome o;
  const auto scenario = load_scenario(fixtures::bundled_scenario_path());
  const auto& limits = scenario.config.locomotion;
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> mag(-10.0, 10.0);
  std::uniform_int_distribution<int> hold(1, 300);
  BaseState s;
  BaseTwistCommand cmd;
  int left = 0;
  double peak = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    if (left-- <= 0) {
      cmd = {mag(gen), mag(gen), mag(gen)};
      left = hold(gen);
    }
    s = step_base(s, cmd, scenario.dt, limits);
    peak = std::max(peak, std::hypot(s.vx, s.vy));
  }
  if (peak > 1.3 + 1e-12) o.fail("peak planar speed " + std::to_string(peak));
  std::ostringstream d;
  d.precision(15);
  d << "peak " << peak << " m/s over 1e6 steps";
  if (o.ok) o.detail = d.str();
  return o;
}

Outcome jacobian_check() {
  Outcome o;
  const auto model = RobotModel::standard();
  std::mt19937_64 gen(4242);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    worst = std::max(worst, jacobian_relative_error(random_config(gen, model), model));
  }
  if (!(worst < 1e-5)) o.fail("relative error " + std::to_string(worst));
  std::ostringstream d;
  d << "worst relative error " << worst << " over 1000 configurations";
  if (o.ok) o.detail = d.str();
  return o;
}

Outcome servo_convergence() {
  Outcome o;
  const auto model = RobotModel::standard();
  const RouterConfig router;
  const auto start = initial_configuration(ControlMode::EEFront, RobotConfiguration{}, router);
  std::mt19937_64 gen(777);
  int worst_ticks = 0;
  for (int i = 0; i < 100; ++i) {
    const auto target = random_reachable_target(gen, model);
    const auto r = servo_to(start, target, model);
    worst_ticks = std::max(worst_ticks, r.ticks);
    if (!r.converged || r.ticks > 2000 || !(r.position_error < 1e-3) ||
        !(r.angle_error < 0.5 * std::numbers::pi / 180.0)) {
      o.fail("target " + std::to_string(i) + " pos err " + std::to_string(r.position_error));
    }
    if (r.collision_reports != 0) o.fail("self-collision on target " + std::to_string(i));
  }
  if (o.ok) o.detail = "100 targets, slowest " + std::to_string(worst_ticks) + " ticks";
  return o;
}

struct ScriptCursor {
  const PilotScript* script = nullptr;
  std::size_t next = 0;
  QuadstickFrame frame;

  // Input for the world's next tick, as run_headless schedules it.
  std::vector<std::string> advance(const SimWorld& w) {
    std::vector<std::string> said;
    const auto tick = w.state().tick_index;
    while (next < script->entries.size() &&
           std::llround(script->entries[next].t / w.scenario().dt) <= tick) {
      const auto& e = script->entries[next++];
      if (e.frame) frame = *e.frame;
      if (e.transcript) said.push_back(*e.transcript);
    }
    return said;
  }
};

int world_voice_aborts(Outcome& o) {
  const auto scenario = load_scenario(fixtures::bundled_scenario_path());
  const auto script = PilotScript::load(fixtures::golden_script_path());
  SimWorld w(scenario);
  ScriptCursor cursor{&script};
  while (!w.finished() && w.state().face_touch.state().phase != FaceTouchPhase::Approaching) {
    const auto said = cursor.advance(w);
    w.step(cursor.frame, said);
  }
  if (w.state().face_touch.state().phase != FaceTouchPhase::Approaching) {
    o.fail("golden pilot never starts a face touch");
    return 0;
  }
  // Length of the undisturbed approach phase.
  int approach_ticks = 0;
  {
    SimWorld probe = w;
    ScriptCursor c = cursor;
    while (probe.state().face_touch.state().phase == FaceTouchPhase::Approaching) {
      const auto said = c.advance(probe);
      probe.step(c.frame, said);
      ++approach_ticks;
    }
  }
  std::mt19937_64 gen(7331);
  std::uniform_int_distribution<int> offset(0, std::max(0, approach_ticks - 1));
  const std::vector<std::string> phrases{"retreat", "stop", "Back off please", "STOP"};
  int trials = 0;
  for (int i = 0; i < 40; ++i) {
    SimWorld run = w;
    ScriptCursor c = cursor;
    const int k = offset(gen);
    for (int n = 0; n < k; ++n) {
      const auto said = c.advance(run);
      run.step(c.frame, said);
    }
    const auto before = run.state().face_touch.state().phase;
    if (before != FaceTouchPhase::Approaching && before != FaceTouchPhase::Contact) continue;
    auto said = c.advance(run);
    said.push_back(phrases[static_cast<std::size_t>(i) % phrases.size()]);
    run.step(c.frame, said);
    ++trials;
    if (run.state().face_touch.state().phase != FaceTouchPhase::Retracting) {
      o.fail("in-world abort at approach tick " + std::to_string(k) + " did not retract (c)");
    }
  }
  if (trials == 0) o.fail("no in-world abort landed during the approach");
  return trials;
}

Outcome face_touch_safety() {
  Outcome o;
  const std::vector<std::string> phrases{"stop", "STOP now", "please retreat", "back off",
                                         "retreat!", "ok stop"};
  std::mt19937_64 gen(5150);
  std::uniform_int_distribution<int> when(0, 900);
  std::uniform_int_distribution<int> kind_of(0, 2);
  std::uniform_int_distribution<std::size_t> pick(0, phrases.size() - 1);
  int collisions = 0;
  int aborts_while_active = 0;
  for (int i = 0; i < 200; ++i) {
    FaceTouchTrial trial;
    trial.seed = 9000 + i;
    const int kind = kind_of(gen);  // 0 contact, 1 abort, 2 both
    if (kind != 1) trial.collision_tick = when(gen);
    if (kind != 0) {
      trial.abort_tick = when(gen);
      trial.abort_transcript = phrases[pick(gen)];
    }
    const auto rep = run_face_touch_trial(trial);
    const std::string tag = "trial " + std::to_string(i);
    if (rep.illegal_transition) o.fail(tag + ": illegal transition");
    if (rep.advanced_after_collision) o.fail(tag + ": advanced after collision (a)");
    if (rep.retraction_not_monotone) o.fail(tag + ": retraction not monotone (b)");
    if (rep.collision_asserted_tick >= 0) ++collisions;
    const auto p = rep.phase_at_abort;
    if (p == FaceTouchPhase::Acquiring || p == FaceTouchPhase::Approaching ||
        p == FaceTouchPhase::Contact) {
      ++aborts_while_active;
      if (rep.retract_entered_tick < 0 || rep.retract_entered_tick > trial.abort_tick + 1) {
        o.fail(tag + ": voice abort did not retract within one tick (c)");
      }
    }
  }
  if (collisions == 0 || aborts_while_active == 0) o.fail("fuzz never exercised both paths");

  // Same property through the full world tick: the golden pilot's toothbrush
  // approach, cut short by a transcript at a fuzzed tick.
  const int world_trials = world_voice_aborts(o);
  if (o.ok) {
    o.detail = "200 trials, " + std::to_string(collisions) + " collisions, " +
               std::to_string(aborts_while_active) + " voice aborts while active, " +
               std::to_string(world_trials) + " in-world aborts";
  }
  return o;
}

Outcome voice_dispatcher() {
  Outcome o;
  const auto table = KeywordTable::defaults();
  const std::vector<VoiceCommand> by_priority{VoiceCommand::Stop, VoiceCommand::RetreatFaceTouch,
                                              VoiceCommand::StartFaceTouch};
  int combos = 0;
  // Priority: every presence mask, every keyword of each present command.
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<std::vector<std::string>> choices;
    for (int c = 0; c < 3; ++c) {
      if (!(mask & (1 << c))) continue;
      const auto& words = table.keywords(by_priority[c]);
      choices.emplace_back(words.begin(), words.end());
    }
    std::optional<VoiceCommand> expect;
    for (int c = 0; c < 3 && !expect; ++c) {
      if (mask & (1 << c)) expect = by_priority[c];
    }
    std::function<void(std::size_t, std::string)> walk = [&](std::size_t k, std::string text) {
      if (k == choices.size()) {
        for (const auto& wrapped : {text, "(" + text + ")", "Um, " + text + "!"}) {
          ++combos;
          if (parse_transcript(wrapped, table) != expect) o.fail("priority: \"" + wrapped + "\"");
        }
        return;
      }
      for (const auto& w : choices[k]) walk(k + 1, text + " " + w);
    };
    walk(0, "well");
  }
  // Token boundaries: a keyword inside a longer token never matches.
  for (auto cmd : by_priority) {
    for (const auto& w : table.keywords(cmd)) {
      for (const auto& embedded : {"x" + w, w + "x", w + "2", "un" + w + "able"}) {
        ++combos;
        if (parse_transcript(embedded, table)) o.fail("boundary: \"" + embedded + "\"");
      }
    }
  }
  // "stop" zeroes routed commands on the tick it is heard, in every control mode.
  for (auto mode : kModes) {
    SimWorld w(fixtures::small_scenario());
    QuadstickFrame to_mode;
    if (mode != ControlMode::BaseControl) to_mode.channels[kModeSwitchChannel] = BreathState::Suck;
    w.step(to_mode);
    if (mode == ControlMode::EETop) {
      QuadstickFrame press;
      press.push_button = true;
      w.step(press);
    }
    w.step({});
    if (w.state().control.mode != mode) {
      o.fail("could not reach mode " + std::string(to_string(mode)));
      continue;
    }
    QuadstickFrame go;
    go.joystick_h = 1.0;
    go.joystick_v = -1.0;
    go.channels[kThirdAxisChannel] = BreathState::Blow;
    go.channels[kGripperChannel] = BreathState::Blow;
    w.step(go);
    if (w.state().routed.motion_is_zero()) o.fail("no motion before stop");
    w.step(go, {"Stop!"});
    if (!w.state().routed.motion_is_zero() || w.state().routed.gripper != GripperAction::Hold) {
      o.fail("stop did not zero commands on the same tick in " + std::string(to_string(mode)));
    }
  }
  if (o.ok) o.detail = std::to_string(combos) + " transcripts; stop zeroes on the same tick";
  return o;
}

Outcome golden_run(std::string& report) {
  Outcome o;
  const auto scenario = load_scenario(fixtures::bundled_scenario_path());
  const auto script = PilotScript::load(fixtures::golden_script_path());
  const auto log_path = std::filesystem::temp_directory_path() / "quadassist_acceptance.log";
  const auto first = run_headless(scenario, script, {std::nullopt, log_path, "bundled"});
  const auto second = run_headless(scenario, script);
  if (!first.score.complete || first.score.points != first.score.max_points) {
    o.fail("points " + std::to_string(first.score.points) + "/" +
           std::to_string(first.score.max_points));
  }
  if (first.final_digest != second.final_digest) o.fail("digest differs between two runs");
  const auto replay = replay_event_log(read_event_log(log_path), scenario);
  std::filesystem::remove(log_path);
  if (!replay.ok() || replay.truncated) o.fail("replay mismatch: " + replay.mismatch_detail);
  if (replay.final_digest != first.final_digest) o.fail("replay digest differs");
  report = first.score.report();
  if (report.find("percent of the time moving") == std::string::npos) {
    o.fail("report lacks the locomotion/manipulation split");
  }
  if (o.ok) {
    o.detail = std::to_string(first.score.points) + "/" + std::to_string(first.score.max_points) +
               " points, digest " + first.final_digest.substr(0, 16) + " stable under replay";
  }
  return o;
}

Outcome mapping_latency() {
  Outcome o;
  const auto scenario = fixtures::small_scenario();
  const double latency = scenario.config.quadstick.switch_latency;
  std::mt19937_64 gen(606);
  std::uniform_real_distribution<double> axis(-1.0, 1.0);
  std::uniform_int_distribution<int> state(0, 2);
  std::uniform_int_distribution<int> hold(1, 40);
  int pending_ticks = 0;
  int completions = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SimWorld w(scenario);
    QuadstickFrame f;
    int left = 0;
    for (int n = 0; n < 1500; ++n) {
      if (left-- <= 0) {
        f.joystick_h = axis(gen);
        f.joystick_v = axis(gen);
        for (auto& c : f.channels) c = kStates[state(gen)];
        f.push_button = state(gen) == 0;
        left = hold(gen);
      }
      const auto before = w.state().mapping;
      const double now = static_cast<double>(w.state().tick_index) * scenario.dt;
      w.step(f);
      const auto& after = w.state().mapping;
      if (after.transition_pending()) {
        ++pending_ticks;
        if (!w.state().routed.motion_is_zero()) o.fail("axis command routed while pending");
      }
      if (after.current != before.current) {
        ++completions;
        if (!before.transition_started_at ||
            now - *before.transition_started_at < latency - 1e-9) {
          o.fail("transition completed early at t=" + std::to_string(now));
        }
      }
    }
  }
  if (completions == 0) o.fail("no transition completed");
  if (o.ok) {
    o.detail = std::to_string(completions) + " switches, " + std::to_string(pending_ticks) +
               " pending ticks all silent";
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  std::string golden_report;
  const std::vector<Criterion> criteria{
      {"axis_table_routing", 1.0, axis_table_routing},
      {"base_speed_cap", 30.0, speed_cap},
      {"jacobian_finite_difference", 10.0, jacobian_check},
      {"ee_servo_convergence", 60.0, servo_convergence},
      {"face_touch_safety", 30.0, face_touch_safety},
      {"voice_dispatcher", 30.0, voice_dispatcher},
      {"golden_run", 120.0, [&] { return golden_run(golden_report); }},
      {"mapping_switch_latency", 30.0, mapping_latency},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= c.budget_s) {
      o.fail("took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_s) + " s");
    }
    if (!o.ok) ++failures;
    std::printf("%s  %-28s %s (%.2f s)\n", o.ok ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  if (!golden_report.empty()) std::printf("\ngolden run report:\n%s\n", golden_report.c_str());
  return failures == 0 ? 0 : 1;
}
