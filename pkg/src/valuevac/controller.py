"""Three-mode behavior machine: observation sweeps, cleaning with capture
bursts, and docking. Mode changes are driven exclusively by decisions
(reasoning pipeline or operator override) applied at tick boundaries.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .world import Clock, SceneFrame, World
from .geometry import angle_diff_deg, bearing_deg, dist


class Mode(str, Enum):
    OBSERVATION = "observation"
    CLEANING = "cleaning"
    DOCKING = "docking"


class DecisionToken(str, Enum):
    CLEAN = "CLEAN"
    WAIT = "WAIT"
    DOCK = "DOCK"
    CONTINUE = "CONTINUE"
    INTERRUPT = "INTERRUPT"


class DecisionSource(str, Enum):
    MODEL = "model"
    SAFE_DEFAULT = "safe_default"
    OPERATOR_OVERRIDE = "operator_override"


OBSERVATION_TOKENS = frozenset({DecisionToken.CLEAN, DecisionToken.WAIT, DecisionToken.DOCK})
CLEANING_TOKENS = frozenset({DecisionToken.CONTINUE, DecisionToken.INTERRUPT})


def tokens_for_mode(mode: Mode) -> frozenset[DecisionToken]:
    return OBSERVATION_TOKENS if mode is Mode.OBSERVATION else CLEANING_TOKENS


@dataclass(frozen=True)
class Decision:
    token: DecisionToken
    source: DecisionSource = DecisionSource.MODEL


def safe_default_for(mode: Mode) -> Decision:
    """The conservative decision when the pipeline fails: pause activity."""
    token = DecisionToken.WAIT if mode is Mode.OBSERVATION else DecisionToken.INTERRUPT
    return Decision(token, DecisionSource.SAFE_DEFAULT)


class TransitionError(Exception):
    """Decision token does not belong to the current mode's vocabulary."""


def transition(mode: Mode, decision: Decision) -> Mode:
    """Next mode for a decision applied in `mode`.

    Model and safe-default decisions must use the mode's own vocabulary and
    cannot leave docking. Operator overrides additionally accept the
    universal DOCK and can pull the robot out of the dock.
    """
    tok = decision.token
    if decision.source is DecisionSource.OPERATOR_OVERRIDE:
        if tok is DecisionToken.DOCK:
            return Mode.DOCKING
        if mode is Mode.DOCKING:
            if tok is DecisionToken.CLEAN:
                return Mode.CLEANING
            if tok is DecisionToken.WAIT:
                return Mode.OBSERVATION
            raise TransitionError(f"override {tok.value} invalid in docking")
        # fall through to the normal vocabulary for the current mode
    elif mode is Mode.DOCKING:
        raise TransitionError("docking accepts only operator overrides")

    if mode is Mode.OBSERVATION:
        if tok is DecisionToken.CLEAN:
            return Mode.CLEANING
        if tok is DecisionToken.WAIT:
            return Mode.OBSERVATION
        if tok is DecisionToken.DOCK:
            return Mode.DOCKING
    elif mode is Mode.CLEANING:
        if tok is DecisionToken.CONTINUE:
            return Mode.CLEANING
        if tok is DecisionToken.INTERRUPT:
            return Mode.OBSERVATION
    raise TransitionError(f"decision {tok.value} invalid in mode {mode.value}")


@dataclass
class CadenceConfig:
    """Capture cadences. Defaults: 10-frame 180-degree sweep at one frame
    per second, 3-frame bursts at half-second spacing."""

    sweep_frames: int = 10
    sweep_interval: float = 1.0
    sweep_span: float = 180.0
    burst_frames: int = 3
    burst_interval: float = 0.5
    wait_duration: float = 60.0

    def __post_init__(self):
        if self.sweep_frames < 2:
            raise ValueError("sweep_frames must be >= 2")
        for name in ("sweep_interval", "burst_interval", "wait_duration"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.burst_frames < 1:
            raise ValueError("burst_frames must be >= 1")

    @property
    def heading_step(self) -> float:
        return self.sweep_span / (self.sweep_frames - 1)

    @property
    def rotation_rate(self) -> float:
        """Sweep rotation speed in deg/s."""
        return self.heading_step / self.sweep_interval


@dataclass
class SpeedConfig:
    cruise: float = 0.3
    slow: float = 0.1
    slow_threshold: float = 0.5
    turn_rate: float = 90.0  # deg/s cap for escape and docking turns

    def __post_init__(self):
        if not (0 < self.slow <= self.cruise):
            raise ValueError("require 0 < slow <= cruise")
        if self.slow_threshold <= 0 or self.turn_rate <= 0:
            raise ValueError("slow_threshold and turn_rate must be > 0")


@dataclass(frozen=True)
class DriveCommand:
    linear: float
    angular: float


def random_escape_turn(rng: random.Random) -> float:
    """Relative heading change after a bump, uniform over [90, 270] degrees.

    The range guarantees the robot leaves the contact heading; the sign of
    the resulting turn direction is carried by the magnitude (always CCW)."""
    return rng.uniform(90.0, 270.0)


DOCK_ARRIVAL_M = 0.1
DOCK_TIMEOUT_S = 600.0
_HEADING_SNAP_DEG = 1e-7


@dataclass
class TickResult:
    drive: DriveCommand
    sweep_done: list[SceneFrame] | None = None
    burst_done: list[SceneFrame] | None = None
    escape_started: float | None = None
    dock_arrived: bool = False
    stranded: bool = False


@dataclass
class _SweepState:
    start_heading: float
    start_time: float
    frames: list[SceneFrame] = field(default_factory=list)
    next_index: int = 0
    ticks: int = 0


@dataclass
class _BurstState:
    start_time: float
    frames: list[SceneFrame] = field(default_factory=list)
    next_index: int = 0
    ticks: int = 0


class ModeController:
    """Tick-driven controller. The simulation loop calls tick() once per
    world step and applies completed pipeline decisions via apply_decision().
    """

    def __init__(
        self,
        cadence: CadenceConfig | None = None,
        speeds: SpeedConfig | None = None,
        seed: int = 0,
        dt: float = 0.05,
        start_mode: Mode = Mode.OBSERVATION,
    ):
        self.cadence = cadence or CadenceConfig()
        self.speeds = speeds or SpeedConfig()
        self.dt = dt
        self.rng_seed = seed
        self.rng = random.Random(seed)
        self.mode = start_mode
        self.blocked_cycles = 0
        self.wait_timer = 0.0
        self.last_decision_id: int | None = None
        self.eval_pending = False
        self.dock_terminal = False
        self.stranded = False
        self._sweep: _SweepState | None = None
        self._burst: _BurstState | None = None
        self._escape_remaining = 0.0
        self._dock_elapsed = 0.0
        self._sweep_interval_ticks = self._ticks_for(self.cadence.sweep_interval)
        self._burst_interval_ticks = self._ticks_for(self.cadence.burst_interval)

    def _ticks_for(self, seconds: float) -> int:
        n = round(seconds / self.dt)
        if n < 1 or abs(n * self.dt - seconds) > 1e-9:
            raise ValueError(f"interval {seconds}s is not a multiple of dt={self.dt}s")
        return n

    # -- decisions ----------------------------------------------------------

    def apply_decision(self, decision: Decision) -> tuple[Mode, Mode] | None:
        """Apply a decision at a tick boundary. Returns (old, new) when the
        mode changes, None for a same-mode outcome."""
        old = self.mode
        new = transition(old, decision)
        self.eval_pending = False
        if decision.token is DecisionToken.CLEAN:
            self.blocked_cycles = 0
        elif decision.token is DecisionToken.WAIT and old is Mode.OBSERVATION:
            self.blocked_cycles += 1
            self.wait_timer = self.cadence.wait_duration
        if new is not old:
            self._enter_mode(new)
            self.mode = new
            return (old, new)
        return None

    def _enter_mode(self, mode: Mode) -> None:
        self._sweep = None
        self._burst = None
        self._escape_remaining = 0.0
        if mode is Mode.DOCKING:
            self._dock_elapsed = 0.0
            self.dock_terminal = False
            self.stranded = False
        elif mode is Mode.OBSERVATION:
            self.wait_timer = 0.0

    def on_sweep_failure(self) -> Decision:
        """Frame source failed mid-sweep: abort and fall back to waiting."""
        self._sweep = None
        decision = safe_default_for(Mode.OBSERVATION)
        self.apply_decision(decision)
        return decision

    def on_burst_failure(self) -> None:
        self._burst = None

    # -- per-tick behavior ----------------------------------------------------

    def tick(self, world: World, clock: Clock) -> TickResult:
        if self.mode is Mode.OBSERVATION:
            result = self._tick_observation(world, clock)
        elif self.mode is Mode.CLEANING:
            result = self._tick_cleaning(world, clock)
        else:
            result = self._tick_docking(world, clock)
        world.set_drive(result.drive.linear, result.drive.angular)
        return result

    # Observation: idle while waiting or while a decision is being evaluated,
    # otherwise rotate in place capturing the sweep.
    def _tick_observation(self, world: World, clock: Clock) -> TickResult:
        if self.eval_pending:
            return TickResult(DriveCommand(0.0, 0.0))
        if self.wait_timer > 0.0:
            self.wait_timer = max(0.0, self.wait_timer - self.dt)
            return TickResult(DriveCommand(0.0, 0.0))
        if self._sweep is None:
            self._sweep = _SweepState(
                start_heading=world.robot_pose.heading, start_time=clock.sim_time
            )
        sweep = self._sweep
        capture_tick = sweep.next_index * self._sweep_interval_ticks
        if sweep.ticks == capture_tick and sweep.next_index < self.cadence.sweep_frames:
            frame_clock = Clock(
                sim_time=sweep.start_time + sweep.next_index * self.cadence.sweep_interval,
                wall_clock=clock.wall_clock,
            )
            frame = world.capture_frame(
                pose=world.robot_pose, clock=frame_clock, phase="sweep", index=sweep.next_index
            )
            sweep.frames.append(frame)
            sweep.next_index += 1
        if sweep.next_index >= self.cadence.sweep_frames:
            frames = sweep.frames
            self._sweep = None
            self.eval_pending = True
            return TickResult(DriveCommand(0.0, 0.0), sweep_done=frames)
        sweep.ticks += 1
        return TickResult(DriveCommand(0.0, self.cadence.rotation_rate))

    # Cleaning: straight-line cruise, slow near obstacles, bump-and-turn,
    # capture bursts while moving.
    def _tick_cleaning(self, world: World, clock: Clock) -> TickResult:
        result = TickResult(DriveCommand(0.0, 0.0))
        self._capture_burst_frame(world, clock, result)
        result.drive = self._motion_drive(world, result)
        return result

    def _motion_drive(self, world: World, result: TickResult) -> DriveCommand:
        if self._escape_remaining > 0.0:
            turn = min(self._escape_remaining, self.speeds.turn_rate * self.dt)
            self._escape_remaining -= turn
            if self._escape_remaining < _HEADING_SNAP_DEG:
                self._escape_remaining = 0.0
            return DriveCommand(0.0, turn / self.dt)
        if world.collided:
            delta = random_escape_turn(self.rng)
            self._escape_remaining = delta
            result.escape_started = delta
            return DriveCommand(0.0, 0.0)
        proximity = world.raycast_proximity()
        if proximity.distance < self.speeds.slow_threshold:
            return DriveCommand(self.speeds.slow, 0.0)
        return DriveCommand(self.speeds.cruise, 0.0)

    def _capture_burst_frame(self, world: World, clock: Clock, result: TickResult) -> None:
        if self._burst is None:
            self._burst = _BurstState(start_time=clock.sim_time)
        burst = self._burst
        capture_tick = burst.next_index * self._burst_interval_ticks
        if burst.ticks == capture_tick and burst.next_index < self.cadence.burst_frames:
            frame_clock = Clock(
                sim_time=burst.start_time + burst.next_index * self.cadence.burst_interval,
                wall_clock=clock.wall_clock,
            )
            frame = world.capture_frame(
                pose=world.robot_pose, clock=frame_clock, phase="burst", index=burst.next_index
            )
            burst.frames.append(frame)
            burst.next_index += 1
            if burst.next_index >= self.cadence.burst_frames:
                result.burst_done = burst.frames
                self._burst = None
                return
        burst.ticks += 1

    # Docking: face the dock, drive straight with the cleaning bump logic,
    # stop for good on arrival.
    def _tick_docking(self, world: World, clock: Clock) -> TickResult:
        result = TickResult(DriveCommand(0.0, 0.0))
        if self.dock_terminal or self.stranded:
            return result
        dock = world.plan.dock
        pos = world.robot_pose.position
        if dist(pos, dock.position) <= DOCK_ARRIVAL_M:
            self.dock_terminal = True
            result.dock_arrived = True
            return result
        self._dock_elapsed += self.dt
        if self._dock_elapsed > DOCK_TIMEOUT_S:
            self.stranded = True
            result.stranded = True
            return result
        if self._escape_remaining > 0.0 or world.collided:
            result.drive = self._motion_drive(world, result)
            return result
        want = bearing_deg(pos, dock.position)
        err = angle_diff_deg(want, world.robot_pose.heading)
        max_step = self.speeds.turn_rate * self.dt
        if abs(err) > _HEADING_SNAP_DEG:
            turn = math.copysign(min(abs(err), max_step), err)
            result.drive = DriveCommand(0.0, turn / self.dt)
            return result
        proximity = world.raycast_proximity()
        speed = self.speeds.slow if proximity.distance < self.speeds.slow_threshold else self.speeds.cruise
        result.drive = DriveCommand(speed, 0.0)
        return result
