#include <filesystem>
#include <sstream>
#include <string>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "quadassist/control_router.hpp"
#include "quadassist/errors.hpp"
#include "quadassist/event_log.hpp"
#include "quadassist/session.hpp"
#include "quadassist/voice.hpp"
#include "quadassist/world.hpp"

namespace py = pybind11;
using namespace quadassist;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

QuadstickFrame frame_from_python(const py::handle& obj) {
  auto j = from_python(obj);
  if (j.is_object() && !j.contains("t")) j["t"] = 0.0;
  return decode_frame(j);
}

py::dict headless_result(const HeadlessResult& r) {
  py::dict d;
  d["score"] = to_python(r.score.to_json());
  d["report"] = r.score.report();
  d["digest"] = r.final_digest;
  d["ticks"] = r.ticks;
  return d;
}

ControlMode control_mode_from(const std::string& name) {
  for (auto m : {ControlMode::BaseControl, ControlMode::EEFront, ControlMode::EETop}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown control mode: " + name);
}

MappingMode mapping_mode_from(const std::string& name) {
  for (auto m : {MappingMode::Primary, MappingMode::Secondary}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown mapping mode: " + name);
}

/// Stepping handle over one run.
class PySim {
 public:
  PySim(const std::filesystem::path& scenario, std::optional<std::uint64_t> seed)
      : world_(load_scenario(scenario), seed) {}

  py::dict step(const py::object& frame, const std::vector<std::string>& transcripts) {
    const auto f = frame.is_none() ? QuadstickFrame{} : frame_from_python(frame);
    const auto r = world_.step(f, transcripts);
    py::list events;
    for (const auto& e : r.events) {
      py::dict ev;
      ev["kind"] = e.kind;
      ev["payload"] = to_python(e.payload);
      events.append(ev);
    }
    py::dict d;
    d["events"] = events;
    d["digest"] = r.digest;
    return d;
  }

  py::object snapshot() const { return to_python(world_.snapshot()); }
  std::string digest() const { return world_.digest(); }
  std::int64_t tick() const { return world_.state().tick_index; }
  bool finished() const { return world_.finished(); }
  int points() const { return world_.points(); }

 private:
  SimWorld world_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Quadstick-driven assistive robot simulator";

  py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_ValueError);
  py::register_exception<ScriptError>(m, "ScriptError", PyExc_ValueError);
  py::register_exception<ReplayError>(m, "ReplayError", PyExc_RuntimeError);
  py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("scenario_summary",
        [](const std::filesystem::path& path) { return to_python(scenario_summary(load_scenario(path))); },
        py::arg("scenario"));

  m.def(
      "run_script",
      [](const std::filesystem::path& scenario, const std::filesystem::path& script,
         std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> record) {
        const auto s = load_scenario(scenario);
        const auto p = PilotScript::load(script);
        HeadlessResult r;
        {
          py::gil_scoped_release release;
          r = run_headless(s, p, {seed, record, scenario.string()});
        }
        return headless_result(r);
      },
      py::arg("scenario"), py::arg("script"), py::arg("seed") = py::none(),
      py::arg("record") = py::none(), "Runs a pilot script headless.");

  m.def(
      "replay",
      [](const std::filesystem::path& log_path, const std::filesystem::path& scenario) {
        const auto report = replay_event_log(read_event_log(log_path), load_scenario(scenario));
        py::dict d;
        d["ok"] = report.ok();
        d["ticks_replayed"] = report.ticks_replayed;
        d["truncated"] = report.truncated;
        d["digest"] = report.final_digest;
        d["first_mismatch_tick"] = report.first_mismatch_tick;
        d["warnings"] = report.warnings;
        return d;
      },
      py::arg("log"), py::arg("scenario"));

  m.def(
      "score_log",
      [](const std::filesystem::path& log_path) {
        return to_python(score_run(read_event_log(log_path)).to_json());
      },
      py::arg("log"));

  m.def(
      "route",
      [](const py::object& frame, const std::string& mode, const std::string& mapping) {
        const RateCaps caps;
        const auto cmd = route_axes(frame_from_python(frame), control_mode_from(mode),
                                    mapping_mode_from(mapping), caps);
        py::dict d;
        if (const auto* b = std::get_if<BaseTwistCommand>(&cmd.motion)) {
          d["base"] = py::make_tuple(b->vx, b->vy, b->wyaw);
        } else {
          const auto& e = std::get<EETwistCommand>(cmd.motion);
          d["ee"] = py::make_tuple(e.vx, e.vy, e.vz, e.wroll, e.wpitch, e.wyaw);
        }
        d["gripper"] = std::string(to_string(cmd.gripper));
        return d;
      },
      py::arg("frame"), py::arg("mode"), py::arg("mapping") = "Primary",
      "Routes one frame with the default rate caps.");

  m.def(
      "parse_transcript",
      [](const std::string& text) -> std::optional<std::string> {
        const auto cmd = parse_transcript(text, KeywordTable::defaults());
        if (!cmd) return std::nullopt;
        return std::string(to_string(*cmd));
      },
      py::arg("text"));

  py::class_<PySim>(m, "Sim")
      .def(py::init<const std::filesystem::path&, std::optional<std::uint64_t>>(),
           py::arg("scenario"), py::arg("seed") = py::none())
      .def("step", &PySim::step, py::arg("frame") = py::none(),
           py::arg("transcripts") = std::vector<std::string>{})
      .def("snapshot", &PySim::snapshot)
      .def_property_readonly("digest", &PySim::digest)
      .def_property_readonly("tick", &PySim::tick)
      .def_property_readonly("finished", &PySim::finished)
      .def_property_readonly("points", &PySim::points);
}
