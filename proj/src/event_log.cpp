#include "quadassist/event_log.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "quadassist/errors.hpp"

namespace quadassist {

nlohmann::json LogHeader::to_json() const {
  return {{"format", kEventLogFormat},
          {"version", version},
          {"scenario", {{"name", scenario_name},
                        {"version", scenario_version},
                        {"digest", scenario_digest},
                        {"path", scenario_path}}},
          {"seed", seed},
          {"dt", dt},
          {"tasks", tasks}};
}

LogHeader LogHeader::from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string()) != kEventLogFormat) {
      throw ReplayError("event log header: not a quadassist event log");
    }
    LogHeader h;
    h.version = j.at("version").get<int>();
    const auto& s = j.at("scenario");
    h.scenario_name = s.at("name").get<std::string>();
    h.scenario_version = s.at("version").get<std::string>();
    h.scenario_digest = s.at("digest").get<std::string>();
    h.scenario_path = s.value("path", std::string());
    h.seed = j.at("seed").get<std::uint64_t>();
    h.dt = j.at("dt").get<double>();
    h.tasks = j.value("tasks", nlohmann::json::array());
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ReplayError(std::string("event log header: ") + e.what());
  }
}

LogHeader make_header(const TaskScenario& scenario, std::uint64_t seed,
                      const std::string& scenario_path) {
  LogHeader h;
  h.scenario_name = scenario.name;
  h.scenario_version = scenario.version;
  h.scenario_digest = scenario.digest;
  h.scenario_path = scenario_path;
  h.seed = seed;
  h.dt = scenario.dt;
  for (const auto& t : scenario.tasks) {
    nlohmann::json goals = nlohmann::json::array();
    for (const auto& g : t.subgoals) goals.push_back({{"id", g.id}, {"points", g.points}});
    h.tasks.push_back({{"name", t.name}, {"subgoals", goals}});
  }
  return h;
}

nlohmann::json LogEntry::to_json() const {
  return {{"t", t}, {"tick", tick}, {"kind", kind}, {"payload", payload}};
}

std::int64_t EventLog::tick_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.kind == "tick";
  return n;
}

void EventLogWriter::write_header(const LogHeader& header) {
  *out_ << header.to_json().dump() << '\n';
}

void EventLogWriter::write(const LogEntry& entry) { *out_ << entry.to_json().dump() << '\n'; }

void EventLogWriter::write_step(std::int64_t tick, double dt, const StepResult& step) {
  const double t = static_cast<double>(tick) * dt;
  for (const auto& e : step.events) write({t, tick, e.kind, e.payload});
  write({t, tick, "tick", {{"digest", step.digest}}});
}

namespace {

LogEntry entry_from_json(const nlohmann::json& j) {
  LogEntry e;
  e.t = j.at("t").get<double>();
  e.tick = j.at("tick").get<std::int64_t>();
  e.kind = j.at("kind").get<std::string>();
  e.payload = j.at("payload");
  return e;
}

}  // namespace

EventLog read_event_log(std::istream& in) {
  EventLog log;
  std::string line;
  if (!std::getline(in, line)) throw ReplayError("event log: empty file");
  try {
    log.header = LogHeader::from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::parse_error& e) {
    throw ReplayError(std::string("event log header: ") + e.what());
  }

  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() && i + 1 == lines.size()) break;
    try {
      log.entries.push_back(entry_from_json(nlohmann::json::parse(lines[i])));
    } catch (const nlohmann::json::exception& e) {
      if (i + 1 == lines.size()) {
        log.truncated = true;
        log.warnings.push_back("event log: damaged final line " + std::to_string(i + 2) +
                               " ignored");
        break;
      }
      throw ReplayError("event log line " + std::to_string(i + 2) + ": " + e.what());
    }
  }
  const bool ended = !log.entries.empty() && [&] {
    for (auto it = log.entries.rbegin(); it != log.entries.rend(); ++it) {
      if (it->kind == "end") return true;
    }
    return false;
  }();
  if (!ended) {
    log.truncated = true;
    log.warnings.push_back("event log: no end event; only the recorded prefix is available");
  }
  return log;
}

EventLog read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReplayError("cannot open event log '" + path.string() + "'");
  return read_event_log(in);
}

ReplayReport replay_event_log(const EventLog& log, const TaskScenario& scenario,
                              const std::function<void(const SimWorld&)>& on_tick) {
  if (log.header.version != kEventLogVersion) {
    throw ReplayError("event log version " + std::to_string(log.header.version) +
                      " is not supported (expected " + std::to_string(kEventLogVersion) + ")");
  }
  if (log.header.scenario_digest != scenario.digest) {
    throw ReplayError("event log was recorded with a different scenario (digest " +
                      log.header.scenario_digest + ", loaded " + scenario.digest + ")");
  }
  if (log.header.dt != scenario.dt) throw ReplayError("event log dt differs from the scenario dt");

  ReplayReport rep;
  rep.truncated = log.truncated;
  rep.warnings = log.warnings;
  rep.ticks_in_log = log.tick_count();

  SimWorld world(scenario, log.header.seed);
  QuadstickFrame frame;
  std::size_t i = 0;
  const auto& entries = log.entries;
  while (i < entries.size()) {
    // Gather one tick: its events up to and including the digest line.
    const std::int64_t tick = world.state().tick_index;
    std::vector<const LogEntry*> logged;
    const LogEntry* digest_line = nullptr;
    std::size_t j = i;
    for (; j < entries.size(); ++j) {
      if (entries[j].tick != tick) break;
      if (entries[j].kind == "tick") {
        digest_line = &entries[j];
        ++j;
        break;
      }
      logged.push_back(&entries[j]);
    }
    if (!digest_line) {
      if (j < entries.size()) {
        rep.first_mismatch_tick = tick;
        rep.mismatch_detail = "expected tick " + std::to_string(tick) + ", log continues at tick " +
                              std::to_string(entries[j].tick);
      }
      break;  // incomplete final tick
    }
    i = j;

    std::vector<std::string> transcripts;
    try {
      for (const auto* e : logged) {
        if (e->kind == "frame") frame = decode_frame(e->payload);
        if (e->kind == "transcript") transcripts.push_back(e->payload.at("text").get<std::string>());
      }
    } catch (const std::exception& ex) {
      rep.first_mismatch_tick = tick;
      rep.mismatch_detail = std::string("unreadable input: ") + ex.what();
      break;
    }
    const auto result = world.step(frame, transcripts);
    ++rep.ticks_replayed;
    if (on_tick) on_tick(world);

    std::string detail;
    if (result.events.size() != logged.size()) {
      detail = "event count " + std::to_string(logged.size()) + " in log, " +
               std::to_string(result.events.size()) + " replayed";
    } else {
      for (std::size_t k = 0; k < logged.size() && detail.empty(); ++k) {
        const auto& ev = result.events[k];
        if (ev.kind != logged[k]->kind || ev.payload.dump() != logged[k]->payload.dump()) {
          detail = "event '" + logged[k]->kind + "' differs from the replayed '" + ev.kind + "'";
        }
      }
    }
    const auto logged_digest = digest_line->payload.value("digest", std::string());
    if (detail.empty() && logged_digest != result.digest) {
      detail = "digest " + logged_digest + " in log, " + result.digest + " replayed";
    }
    rep.final_digest = result.digest;
    if (!detail.empty()) {
      rep.first_mismatch_tick = tick;
      rep.mismatch_detail = detail;
      break;
    }
  }
  return rep;
}

double RaceScore::locomotion_percent() const {
  const auto active = locomotion_ticks + manipulation_ticks;
  return active == 0 ? 0.0 : 100.0 * static_cast<double>(locomotion_ticks) / active;
}

double RaceScore::manipulation_percent() const {
  const auto active = locomotion_ticks + manipulation_ticks;
  return active == 0 ? 0.0 : 100.0 * static_cast<double>(manipulation_ticks) / active;
}

nlohmann::json RaceScore::to_json() const {
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : tasks) {
    tj.push_back({{"name", t.name},
                  {"points", t.points},
                  {"max_points", t.max_points},
                  {"completion_time", t.completion_time ? nlohmann::json(*t.completion_time)
                                                        : nlohmann::json()}});
  }
  return {{"tasks", tj},
          {"points", points},
          {"max_points", max_points},
          {"complete", complete},
          {"total_time", total_time()},
          {"locomotion_time", locomotion_time()},
          {"manipulation_time", manipulation_time()},
          {"idle_time", idle_time()},
          {"ticks", {{"total", total_ticks},
                     {"locomotion", locomotion_ticks},
                     {"manipulation", manipulation_ticks},
                     {"idle", idle_ticks}}},
          {"locomotion_percent", locomotion_percent()},
          {"manipulation_percent", manipulation_percent()}};
}

std::string RaceScore::report() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "Score: " << points << "/" << max_points << " points\n";
  for (const auto& t : tasks) {
    os << "  " << t.name << ": " << t.points << "/" << t.max_points;
    if (t.completion_time) {
      os << ", completed at " << *t.completion_time << " s";
    } else {
      os << ", not completed";
    }
    os << "\n";
  }
  const auto whole = static_cast<std::int64_t>(std::floor(total_time()));
  os << "Total time: " << total_time() << " s (" << whole / 60 << " min " << whole % 60 << " s)\n";
  os << "Locomotion " << locomotion_time() << " s, manipulation " << manipulation_time()
     << " s, idle " << idle_time() << " s\n";
  os.precision(0);
  os << locomotion_percent() << " percent of the time moving along the track and "
     << manipulation_percent() << " percent manipulating\n";
  return os.str();
}

RaceScore score_run(const EventLog& log) {
  RaceScore score;
  score.dt = log.header.dt;
  if (!(score.dt > 0.0)) throw ScoringError("event log: dt must be positive");

  std::map<std::string, std::size_t> task_index;
  std::map<std::pair<std::string, std::string>, int> subgoal_points;
  try {
    for (const auto& t : log.header.tasks) {
      TaskResult r;
      r.name = t.at("name").get<std::string>();
      for (const auto& g : t.at("subgoals")) {
        const int p = g.at("points").get<int>();
        r.max_points += p;
        subgoal_points[{r.name, g.at("id").get<std::string>()}] = p;
      }
      task_index[r.name] = score.tasks.size();
      score.max_points += r.max_points;
      score.tasks.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScoringError(std::string("event log header tasks: ") + e.what());
  }

  std::int64_t last_tick = -1;
  std::int64_t end_ticks = -1;
  std::int64_t activity_since = 0;
  std::optional<std::string> activity;
  std::int64_t* counters[3] = {&score.idle_ticks, &score.locomotion_ticks,
                               &score.manipulation_ticks};
  auto counter_for = [&](const std::string& a) -> std::int64_t* {
    if (a == "idle") return counters[0];
    if (a == "locomotion") return counters[1];
    if (a == "manipulation") return counters[2];
    throw ScoringError("event log: unknown activity '" + a + "'");
  };
  std::map<std::pair<std::string, std::string>, bool> seen;

  try {
    for (const auto& e : log.entries) {
      if (e.tick < last_tick) throw ScoringError("event log: tick index goes backwards");
      last_tick = e.tick;
      if (e.kind == "activity") {
        const auto a = e.payload.at("activity").get<std::string>();
        counter_for(a);
        if (activity) *counter_for(*activity) += e.tick - activity_since;
        activity = a;
        activity_since = e.tick;
      } else if (e.kind == "subgoal") {
        const auto task = e.payload.at("task").get<std::string>();
        const auto id = e.payload.at("id").get<std::string>();
        const auto it = subgoal_points.find({task, id});
        if (it == subgoal_points.end()) {
          throw ScoringError("event log: subgoal '" + task + "/" + id + "' is not in the header");
        }
        if (seen[{task, id}]) throw ScoringError("event log: subgoal '" + id + "' latched twice");
        seen[{task, id}] = true;
        score.tasks[task_index[task]].points += it->second;
        score.points += it->second;
      } else if (e.kind == "task") {
        const auto task = e.payload.at("task").get<std::string>();
        const auto it = task_index.find(task);
        if (it == task_index.end()) throw ScoringError("event log: unknown task '" + task + "'");
        score.tasks[it->second].completion_time = static_cast<double>(e.tick + 1) * score.dt;
      } else if (e.kind == "end") {
        end_ticks = e.payload.at("ticks").get<std::int64_t>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScoringError(std::string("event log: malformed entry: ") + e.what());
  }

  score.total_ticks = end_ticks >= 0 ? end_ticks : last_tick + 1;
  if (activity) *counter_for(*activity) += score.total_ticks - activity_since;
  if (score.points > score.max_points) throw ScoringError("event log: points exceed the maximum");
  if (score.locomotion_ticks + score.manipulation_ticks + score.idle_ticks != score.total_ticks) {
    throw ScoringError("event log: activity intervals do not cover the run");
  }
  score.complete = score.max_points > 0 && score.points == score.max_points;
  return score;
}

}  // namespace quadassist
