"""Scenario files: floorplan reference, starting entities, timed events,
fixture bindings, and the expected decision for acceptance runs."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from importlib import resources

import yaml

from ..controller import CLEANING_TOKENS, OBSERVATION_TOKENS, DecisionToken
from ..world import (
    Entity,
    FixtureBinding,
    FloorPlan,
    Pose,
    World,
    load_floorplan,
)

EVENT_ACTIONS = ("spawn", "despawn", "set_activity", "set_motion", "set_wall_clock")

_HHMM_RE = re.compile(r"^([01]\d|2[0-3]):([0-5]\d)$")


class ScenarioError(Exception):
    """Scenario file violates the schema; the message names the field."""


def data_path(name: str) -> str:
    """Path to a bundled data file (scenarios, floorplans, fixtures)."""
    return str(resources.files("valuevac.harness").joinpath("data", name))


@dataclass(frozen=True)
class TimedEvent:
    at: float
    action: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.action not in EVENT_ACTIONS:
            raise ScenarioError(f"event.action: unknown action {self.action!r}")
        if self.at < 0:
            raise ScenarioError("event.at: must be >= 0")


@dataclass
class Scenario:
    name: str
    floorplan_path: str
    wall_clock_start: str = "09:00"
    seed: int = 0
    robot_start: Pose | None = None
    context_tags: tuple[str, ...] = ()
    entities: tuple[dict, ...] = ()
    events: tuple[TimedEvent, ...] = ()
    fixtures: tuple[FixtureBinding, ...] = ()
    expected: DecisionToken | None = None
    expected_cleaning: DecisionToken | None = None
    until: float = 60.0

    def load_plan(self) -> FloorPlan:
        return load_floorplan(self.floorplan_path)

    def build_world(self) -> World:
        plan = self.load_plan()
        entities = [_entity_from_spec(spec, f"entities[{i}]") for i, spec in enumerate(self.entities)]
        return World(
            plan,
            robot_pose=self.robot_start or plan.dock,
            entities=entities,
            context_tags=self.context_tags,
            fixtures=self.fixtures,
        )


def _require(raw: dict, key: str, ctx: str):
    if key not in raw:
        raise ScenarioError(f"{ctx}.{key}: missing required field")
    return raw[key]


def _pose_from(raw, ctx: str) -> Pose:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ScenarioError(f"{ctx}: expected [x, y, heading]")
    try:
        return Pose(float(raw[0]), float(raw[1]), float(raw[2]))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{ctx}: {exc}") from exc


def _entity_from_spec(spec: dict, ctx: str) -> Entity:
    ent_id = _require(spec, "id", ctx)
    kind = _require(spec, "kind", ctx)
    pose = _pose_from(_require(spec, "at", ctx), f"{ctx}.at")
    waypoints = spec.get("waypoints")
    script = None
    if waypoints is not None:
        script = []
        for j, wp in enumerate(waypoints):
            if not isinstance(wp, (list, tuple)) or len(wp) != 2:
                raise ScenarioError(f"{ctx}.waypoints[{j}]: expected [x, y]")
            script.append((float(wp[0]), float(wp[1])))
    try:
        return Entity(
            id=str(ent_id),
            kind=str(kind),
            pose=pose,
            activity=str(spec.get("activity", "")),
            motion_speed=float(spec.get("motion_speed", 0.0)),
            motion_script=script,
        )
    except Exception as exc:
        raise ScenarioError(f"{ctx}: {exc}") from exc


def _event_from_spec(spec: dict, ctx: str) -> TimedEvent:
    if not isinstance(spec, dict):
        raise ScenarioError(f"{ctx}: expected a mapping")
    at = _require(spec, "at", ctx)
    action = _require(spec, "action", ctx)
    try:
        at = float(at)
    except (TypeError, ValueError):
        raise ScenarioError(f"{ctx}.at: must be a number")
    if at < 0:
        raise ScenarioError(f"{ctx}.at: must be >= 0")
    if action not in EVENT_ACTIONS:
        raise ScenarioError(f"{ctx}.action: unknown action {action!r}")
    params = {k: v for k, v in spec.items() if k not in ("at", "action")}
    if action == "spawn":
        entity = params.get("entity")
        if not isinstance(entity, dict):
            raise ScenarioError(f"{ctx}.entity: spawn requires an entity mapping")
        _entity_from_spec(entity, f"{ctx}.entity")  # validate early
    elif action in ("despawn", "set_activity", "set_motion"):
        if not params.get("id"):
            raise ScenarioError(f"{ctx}.id: {action} requires an entity id")
        if action == "set_activity" and "activity" not in params:
            raise ScenarioError(f"{ctx}.activity: set_activity requires a value")
    elif action == "set_wall_clock":
        t = params.get("time", "")
        if not _HHMM_RE.match(str(t)):
            raise ScenarioError(f"{ctx}.time: expected HH:MM, got {t!r}")
    return TimedEvent(at=at, action=action, params=params)


def _token_from(raw, ctx: str, vocabulary) -> DecisionToken:
    try:
        token = DecisionToken(str(raw).upper())
    except ValueError:
        raise ScenarioError(f"{ctx}: unknown decision token {raw!r}")
    if token not in vocabulary:
        raise ScenarioError(f"{ctx}: token {token.value} not in the allowed vocabulary")
    return token


def load_scenario(path: str) -> Scenario:
    """Load and validate a scenario file (YAML or JSON).

    Relative floorplan and fixture paths resolve against the scenario file's
    directory, falling back to the bundled data directory.
    """
    if not os.path.exists(path):
        raise ScenarioError(f"scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"unparseable scenario file: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: top level must be a mapping")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(ref: str, ctx: str) -> str:
        candidates = [ref, os.path.join(base, ref), data_path(ref)]
        for cand in candidates:
            if os.path.isabs(cand) and os.path.exists(cand):
                return cand
            if os.path.exists(cand):
                return os.path.abspath(cand)
        raise ScenarioError(f"{ctx}: file not found: {ref}")

    name = str(_require(raw, "name", "scenario"))
    floorplan = resolve(str(_require(raw, "floorplan", "scenario")), "scenario.floorplan")

    clock = str(raw.get("wall_clock_start", "09:00"))
    if not _HHMM_RE.match(clock):
        raise ScenarioError(f"scenario.wall_clock_start: expected HH:MM, got {clock!r}")

    robot_start = None
    if "robot" in raw:
        robot_start = _pose_from(raw["robot"].get("at"), "scenario.robot.at")

    entities = tuple(raw.get("entities", []) or [])
    for i, spec in enumerate(entities):
        _entity_from_spec(spec, f"entities[{i}]")  # validate now, build later

    events = [
        _event_from_spec(spec, f"events[{i}]") for i, spec in enumerate(raw.get("events", []) or [])
    ]
    events.sort(key=lambda e: e.at)  # stable: file order preserved for equal times

    fixtures = []
    for i, spec in enumerate(raw.get("fixtures", []) or []):
        fpath = resolve(str(_require(spec, "path", f"fixtures[{i}]")), f"fixtures[{i}].path")
        window = spec.get("window")
        if window is not None:
            if not isinstance(window, (list, tuple)) or len(window) != 2:
                raise ScenarioError(f"fixtures[{i}].window: expected [start, end]")
            window = (float(window[0]), float(window[1]))
        fixtures.append(
            FixtureBinding(
                path=fpath,
                phase=spec.get("phase"),
                index=int(spec["index"]) if "index" in spec else None,
                window=window,
            )
        )

    expected = None
    if raw.get("expected") is not None:
        expected = _token_from(raw["expected"], "scenario.expected", OBSERVATION_TOKENS)
    expected_cleaning = None
    if raw.get("expected_cleaning") is not None:
        expected_cleaning = _token_from(
            raw["expected_cleaning"], "scenario.expected_cleaning", CLEANING_TOKENS
        )

    return Scenario(
        name=name,
        floorplan_path=floorplan,
        wall_clock_start=clock,
        seed=int(raw.get("seed", 0)),
        robot_start=robot_start,
        context_tags=tuple(raw.get("context_tags", []) or []),
        entities=entities,
        events=tuple(events),
        fixtures=tuple(fixtures),
        expected=expected,
        expected_cleaning=expected_cleaning,
        until=float(raw.get("until", 60.0)),
    )


def apply_event(world: World, event: TimedEvent) -> None:
    """Mutate the world exactly as the event action describes.

    set_wall_clock does not touch the world; the run loop owns the clock and
    handles it there.
    """
    params = event.params
    if event.action == "spawn":
        world.add_entity(_entity_from_spec(params["entity"], "event.entity"))
    elif event.action == "despawn":
        world.remove_entity(params["id"])
    elif event.action == "set_activity":
        ent = world.entities.get(params["id"])
        if ent is None:
            raise ScenarioError(f"set_activity: unknown entity id {params['id']!r}")
        ent.activity = str(params["activity"])
    elif event.action == "set_motion":
        ent = world.entities.get(params["id"])
        if ent is None:
            raise ScenarioError(f"set_motion: unknown entity id {params['id']!r}")
        if "motion_speed" in params:
            ent.motion_speed = float(params["motion_speed"])
        if "waypoints" in params:
            ent.motion_script = [(float(x), float(y)) for x, y in params["waypoints"]]
    elif event.action == "set_wall_clock":
        pass
    else:  # pragma: no cover - validated at load time
        raise ScenarioError(f"unknown event action {event.action!r}")
