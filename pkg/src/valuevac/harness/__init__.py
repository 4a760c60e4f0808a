"""Scripted scenarios, timed event injection, deterministic replay, and the
consistency/latency evaluation harness."""

from .consistency import ConsistencyReport, agreement_rate, run_trials
from .replay import ReplayIntegrityError, replay_log, replay_records
from .runner import ScenarioRunner, run_scenario
from .scenario import Scenario, ScenarioError, TimedEvent, apply_event, load_scenario

__all__ = [
    "ConsistencyReport",
    "ReplayIntegrityError",
    "Scenario",
    "ScenarioError",
    "ScenarioRunner",
    "TimedEvent",
    "agreement_rate",
    "apply_event",
    "load_scenario",
    "replay_log",
    "replay_records",
    "run_scenario",
    "run_trials",
]
