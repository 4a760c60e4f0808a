"""Closed-loop execution of a scenario on the simulated clock.

One tick = 50 ms of simulated time. Each tick applies due scenario events,
applies any completed pipeline decision and queued operator commands, runs
the controller, then integrates the world. With the deterministic mock
backend an identical (scenario, seed) pair replays byte-identically.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass

from ..controller import (
    CadenceConfig,
    Decision,
    DecisionSource,
    DecisionToken,
    Mode,
    ModeController,
    SpeedConfig,
    TransitionError,
    transition,
)
from ..gateway.logstore import LogRecord, RecordLog
from ..pipeline.backends import BackendDescriptor, make_backend
from ..pipeline.engine import PipelineEngine, PromptConfig
from ..pipeline.records import DecisionRecord
from ..world import Clock, FrameCaptureError, SceneFrame, World
from .scenario import Scenario, TimedEvent, apply_event

TICK_DT = 0.05


class WallClock:
    """HH:MM wall time derived from simulated seconds past a start time."""

    def __init__(self, start_hhmm: str):
        h, m = start_hhmm.split(":")
        self._base_minutes = int(h) * 60 + int(m)
        self._base_sim = 0.0

    def at(self, sim_time: float) -> str:
        minutes = self._base_minutes + int((sim_time - self._base_sim) // 60)
        minutes %= 24 * 60
        return f"{minutes // 60:02d}:{minutes % 60:02d}"

    def set_at(self, sim_time: float, hhmm: str) -> None:
        h, m = hhmm.split(":")
        self._base_minutes = int(h) * 60 + int(m)
        self._base_sim = sim_time


@dataclass
class OperatorCommand:
    kind: str  # "override" | "event"
    token: DecisionToken | None = None
    operator: str = ""
    event: TimedEvent | None = None


class RunLog:
    """A finished run: ordered records plus convenience accessors."""

    def __init__(self, records: list[LogRecord], scenario_name: str):
        self.records = records
        self.scenario_name = scenario_name

    def decisions(self) -> list[LogRecord]:
        return [r for r in self.records if r.kind == "decision"]

    def decision_records(self) -> list[DecisionRecord]:
        return [
            DecisionRecord.from_payload(r.payload)
            for r in self.records
            if r.kind == "decision" and "latencies_ms" in r.payload
        ]

    def mode_changes(self) -> list[LogRecord]:
        return [r for r in self.records if r.kind == "mode_change"]

    def events(self) -> list[LogRecord]:
        return [r for r in self.records if r.kind == "event"]

    def to_jsonl(self) -> str:
        return "\n".join(r.to_json() for r in self.records) + ("\n" if self.records else "")

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


class ScenarioRunner:
    """Owns the world, controller, pipeline jobs, and the event log for one
    run. Single writer; gateway readers receive immutable snapshots."""

    def __init__(
        self,
        scenario: Scenario,
        backend: BackendDescriptor | None = None,
        cadence: CadenceConfig | None = None,
        speeds: SpeedConfig | None = None,
        prompt_config: PromptConfig | None = None,
        log: RecordLog | None = None,
        paced: bool = False,
        acceleration: float = 20.0,
        dt: float = TICK_DT,
        stage_timeout: float | None = None,
        max_retries: int | None = None,
    ):
        self.scenario = scenario
        self.dt = dt
        self.paced = paced
        self.acceleration = acceleration
        self.world = scenario.build_world()
        self.controller = ModeController(
            cadence=cadence, speeds=speeds, seed=scenario.seed, dt=dt
        )
        descriptor = backend or BackendDescriptor(kind="mock")
        self.engine = PipelineEngine(
            make_backend(descriptor),
            prompt_config=prompt_config,
            stage_timeout=stage_timeout,
            max_retries=max_retries,
        )
        self.log = log if log is not None else RecordLog()
        self.wall = WallClock(scenario.wall_clock_start)
        self.ticks = 0
        self._pending_events = list(scenario.events)
        self._inflight: Future | None = None
        self._inflight_job = 0
        self._job_counter = 0
        self._completed: DecisionRecord | None = None
        self._buffered_burst: list[SceneFrame] | None = None
        self._executor: ThreadPoolExecutor | None = None
        self._commands: list[OperatorCommand] = []
        self._commands_lock = threading.Lock()
        self._run_started_real: float | None = None
        self.stranded = False
        self._log_event(
            "run_started",
            {"scenario": scenario.name, "seed": scenario.seed, "mode": self.controller.mode.value},
        )

    # -- clock ----------------------------------------------------------------

    @property
    def sim_time(self) -> float:
        return self.ticks * self.dt

    def clock(self) -> Clock:
        sim = self.sim_time
        return Clock(sim_time=sim, wall_clock=self.wall.at(sim))

    # -- logging ----------------------------------------------------------------

    def _append(self, kind: str, payload: dict) -> LogRecord:
        clk = self.clock()
        return self.log.append(kind, payload, clk.sim_time, clk.wall_clock)

    def _log_event(self, event: str, extra: dict | None = None) -> LogRecord:
        payload = {"event": event}
        if extra:
            payload.update(extra)
        return self._append("event", payload)

    # -- operator interface (thread-safe) ----------------------------------------

    def submit_override(self, token: DecisionToken, operator: str = "operator") -> None:
        with self._commands_lock:
            self._commands.append(OperatorCommand(kind="override", token=token, operator=operator))

    def inject_event(self, event: TimedEvent) -> None:
        with self._commands_lock:
            self._commands.append(OperatorCommand(kind="event", event=event))

    # -- evaluation jobs ----------------------------------------------------------

    def _submit_evaluation(self, phase: str, frames: list[SceneFrame]) -> None:
        self._job_counter += 1
        job = self._job_counter
        self._log_event(
            "eval_submitted",
            {"job": job, "phase": phase, "frame_seqs": [f.seq for f in frames]},
        )
        mode = self.controller.mode
        blocked = self.controller.blocked_cycles
        wall = self.clock().wall_clock
        if self.engine.deterministic:
            record = self.engine.evaluate(frames, mode, blocked, wall)
            self._completed = record
            self._log_event("eval_completed", {"job": job})
        else:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=1)
            self._inflight_job = job
            self._inflight = self._executor.submit(
                self.engine.evaluate, frames, mode, blocked, wall
            )

    def _poll_evaluation(self) -> None:
        if self._inflight is not None and self._inflight.done():
            record = self._inflight.result()
            self._inflight = None
            self._log_event("eval_completed", {"job": self._inflight_job})
            self._completed = record

    def _eval_busy(self) -> bool:
        return self._inflight is not None or self._completed is not None

    # -- decision application -------------------------------------------------------

    def _apply_decision_record(self, record: DecisionRecord) -> None:
        log_rec = self._append("decision", record.to_payload())
        self.controller.last_decision_id = log_rec.id
        try:
            change = self.controller.apply_decision(record.decision)
        except TransitionError as exc:
            self._append("error", {"error": "transition", "detail": str(exc)})
            return
        if change is not None:
            self._append(
                "mode_change",
                {"from": change[0].value, "to": change[1].value, "cause": log_rec.id},
            )
        if record.decision.token is DecisionToken.WAIT:
            self._log_event("waiting", {"seconds": self.controller.cadence.wait_duration})

    def _apply_safe_default_decision(self, decision: Decision, reason: str) -> None:
        log_rec = self._append(
            "decision",
            {
                "decision": {"token": decision.token.value, "source": decision.source.value},
                "mode": self.controller.mode.value,
                "reason": reason,
                "slim": True,
            },
        )
        # on_sweep_failure already applied the transition inside the controller
        self.controller.last_decision_id = log_rec.id

    def _apply_override(self, cmd: OperatorCommand) -> None:
        decision = Decision(cmd.token, DecisionSource.OPERATOR_OVERRIDE)
        try:
            transition(self.controller.mode, decision)
        except TransitionError as exc:
            self._append(
                "error",
                {"error": "override_rejected", "token": cmd.token.value, "detail": str(exc)},
            )
            return
        log_rec = self._append(
            "override",
            {
                "operator": cmd.operator,
                "decision": {"token": cmd.token.value, "source": decision.source.value},
                "mode": self.controller.mode.value,
            },
        )
        change = self.controller.apply_decision(decision)
        # An override supersedes whatever evaluation was in flight.
        self._completed = None
        if change is not None:
            self._append(
                "mode_change",
                {"from": change[0].value, "to": change[1].value, "cause": log_rec.id},
            )

    # -- tick loop -----------------------------------------------------------------

    def tick_once(self) -> None:
        sim = self.sim_time
        # 1. scenario events due at or before this instant, exactly once each
        while self._pending_events and self._pending_events[0].at <= sim + 1e-12:
            event = self._pending_events.pop(0)
            self._run_event(event)
        # 2. operator commands queued since the last boundary
        with self._commands_lock:
            commands, self._commands = self._commands, []
        for cmd in commands:
            if cmd.kind == "override":
                self._apply_override(cmd)
            else:
                self._run_event(cmd.event, injected=True)
        # 3. completed pipeline decisions apply at the boundary
        self._poll_evaluation()
        if self._completed is not None:
            record, self._completed = self._completed, None
            self._apply_decision_record(record)
        # 4. a buffered burst may now be submittable; stale ones are dropped
        if self._buffered_burst is not None:
            if self.controller.mode is not Mode.CLEANING:
                self._buffered_burst = None
            elif not self._eval_busy():
                frames, self._buffered_burst = self._buffered_burst, None
                self._submit_evaluation("burst", frames)
        # 5. controller drives the robot and captures frames
        try:
            result = self.controller.tick(self.world, self.clock())
        except FrameCaptureError as exc:
            self._handle_capture_failure(exc)
            result = None
        if result is not None:
            if result.escape_started is not None:
                self._log_event("escape_turn", {"delta_deg": result.escape_started})
            if result.dock_arrived:
                self._log_event("dock_arrived")
            if result.stranded:
                self.stranded = True
                self._append("error", {"error": "dock_unreachable"})
            if result.sweep_done is not None:
                self._submit_evaluation("sweep", result.sweep_done)
            if result.burst_done is not None:
                if self._eval_busy():
                    self._buffered_burst = result.burst_done
                    self._log_event("burst_buffered", {"frame_seqs": [f.seq for f in result.burst_done]})
                else:
                    self._submit_evaluation("burst", result.burst_done)
        # 6. physics
        self.world.step(self.dt)
        self.ticks += 1
        if self.paced:
            self._pace()
        elif self._inflight is not None:
            time.sleep(0.0002)  # waiting on a live backend; do not spin hot

    def _run_event(self, event: TimedEvent, injected: bool = False) -> None:
        try:
            apply_event(self.world, event)
            if event.action == "set_wall_clock":
                self.wall.set_at(self.sim_time, event.params["time"])
        except Exception as exc:
            self._append("error", {"error": "event_failed", "action": event.action, "detail": str(exc)})
            return
        payload = {"action": event.action, "at": event.at, **_safe_params(event.params)}
        if injected:
            payload["injected"] = True
        self._append("event", {"event": "scenario_event", **payload})

    def _handle_capture_failure(self, exc: FrameCaptureError) -> None:
        mode = self.controller.mode
        self._append("error", {"error": "frame_capture", "path": exc.path, "mode": mode.value})
        if mode is Mode.OBSERVATION:
            decision = self.controller.on_sweep_failure()
            self._apply_safe_default_decision(decision, reason="sweep_aborted")
        elif mode is Mode.CLEANING:
            self.controller.on_burst_failure()

    def _pace(self) -> None:
        if self._run_started_real is None:
            self._run_started_real = time.monotonic() - self.sim_time / self.acceleration
        target = self._run_started_real + self.sim_time / self.acceleration
        delay = target - time.monotonic()
        if delay > 0.0005:
            time.sleep(delay)

    # -- run drivers -------------------------------------------------------------

    def run(self, until: float | None = None, stop=None, max_ticks: int = 10_000_000) -> RunLog:
        horizon = until if until is not None else self.scenario.until
        while self.ticks < max_ticks:
            if self.sim_time >= horizon:
                break
            self.tick_once()
            if stop is not None and stop(self):
                break
        self.close()
        return RunLog(list(self.log.records), self.scenario.name)

    def run_to_first_decision(
        self, target_mode: Mode | None = None, until: float | None = None
    ) -> DecisionRecord | None:
        """Run until the first pipeline decision (optionally in a specific
        mode) has been applied, and return its record."""
        seen: list[DecisionRecord] = []
        baseline = len(self.log.records)

        def stop(runner: "ScenarioRunner") -> bool:
            nonlocal baseline
            for rec in runner.log.records[baseline:]:
                if rec.kind == "decision" and "latencies_ms" in rec.payload:
                    record = DecisionRecord.from_payload(rec.payload)
                    if target_mode is None or record.mode is target_mode:
                        seen.append(record)
                        return True
            baseline = len(runner.log.records)
            return False

        self.run(until=until if until is not None else max(self.scenario.until, 120.0), stop=stop)
        return seen[0] if seen else None

    def snapshot(self) -> dict:
        """Immutable state view for concurrent readers."""
        clk = self.clock()
        pose = self.world.robot_pose
        return {
            "mode": self.controller.mode.value,
            "pose": {"x": pose.x, "y": pose.y, "heading": pose.heading},
            "sim_time": clk.sim_time,
            "wall_clock": clk.wall_clock,
            "wait_timer": self.controller.wait_timer,
            "blocked_cycles": self.controller.blocked_cycles,
            "stranded": self.stranded,
            "dock_terminal": self.controller.dock_terminal,
            "entities": [
                {
                    "id": s.id,
                    "kind": s.kind,
                    "activity": s.activity,
                    "x": self.world.entities[s.id].pose.x,
                    "y": self.world.entities[s.id].pose.y,
                }
                for s in self.world.snapshot_entities()
            ],
            "last_record_id": self.log.records[-1].id if self.log.records else 0,
        }

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=False, cancel_futures=True)
            self._executor = None


def _safe_params(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, (str, int, float, bool)) or value is None:
            out[key] = value
        elif isinstance(value, dict):
            out[key] = {k: v for k, v in value.items() if isinstance(v, (str, int, float, bool))}
        elif isinstance(value, (list, tuple)):
            out[key] = [v for v in value if isinstance(v, (str, int, float, bool, list))]
    return out


def run_scenario(
    scenario: Scenario,
    backend: BackendDescriptor | None = None,
    until: float | None = None,
    **runner_kwargs,
) -> RunLog:
    """Execute the full closed loop and return the ordered run log."""
    runner = ScenarioRunner(scenario, backend=backend, **runner_kwargs)
    return runner.run(until=until)
