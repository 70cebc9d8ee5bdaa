"""Python bindings for the quadassist simulator core."""

from ._core import (
    ConfigError,
    DecodeError,
    ReplayError,
    ScenarioError,
    ScriptError,
    Sim,
    parse_transcript,
    replay,
    route,
    run_script,
    scenario_summary,
    score_log,
)

__all__ = [
    "ConfigError",
    "DecodeError",
    "ReplayError",
    "ScenarioError",
    "ScriptError",
    "Sim",
    "parse_transcript",
    "replay",
    "route",
    "run_script",
    "scenario_summary",
    "score_log",
]
