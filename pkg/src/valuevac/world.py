"""Deterministic 2D simulation of the home.

Holds the floorplan, robot kinematics, people/pet motion, proximity and
collision sensing, and field-of-view frame capture. One logical owner
advances the world; snapshots handed out are immutable values.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

from .geometry import (
    Segment,
    Vec,
    angle_diff_deg,
    bearing_deg,
    closest_point_on_segment,
    dist,
    heading_to_dir,
    normalize_heading,
    point_segment_distance,
    ray_circle_intersection,
    ray_segment_intersection,
    segments_intersect,
    swept_circle_circle_contact,
    swept_circle_segment_contact,
)

# Ledger geometry defaults: vacuum-scale robot, single forward proximity ray,
# RGBD-like camera cone with hard occlusion.
ROBOT_RADIUS = 0.17
PROXIMITY_MAX_RANGE = 2.0
CAMERA_FOV_DEG = 70.0
CAMERA_RANGE_M = 5.0
PERSON_RADIUS = 0.25
PET_RADIUS = 0.15
TICK_DT = 0.05

PERSON_KIND = "person"
PET_KIND = "pet"

# Activities that require hands/screens; invalid on pets.
SCREEN_ACTIVITIES = frozenset({"watching_tv", "using_phone", "video_call"})


class WorldError(Exception):
    pass


class FrameCaptureError(WorldError):
    """Raised when a fixture-bound frame cannot be produced."""

    def __init__(self, path: str):
        super().__init__(f"fixture image missing: {path}")
        self.path = path


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise WorldError(f"pose coordinates must be finite: {self}")
        object.__setattr__(self, "heading", normalize_heading(self.heading))

    @property
    def position(self) -> Vec:
        return (self.x, self.y)


@dataclass
class Entity:
    id: str
    kind: str
    pose: Pose
    activity: str = ""
    motion_speed: float = 0.0
    motion_script: list[Vec] | None = None
    _waypoint_index: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.kind not in (PERSON_KIND, PET_KIND):
            raise WorldError(f"entity {self.id!r}: unknown kind {self.kind!r}")
        if self.motion_speed < 0:
            raise WorldError(f"entity {self.id!r}: motion_speed must be >= 0")
        if self.kind == PET_KIND and self.activity in SCREEN_ACTIVITIES:
            raise WorldError(f"pet {self.id!r} cannot have activity {self.activity!r}")

    @property
    def body_radius(self) -> float:
        return PERSON_RADIUS if self.kind == PERSON_KIND else PET_RADIUS

    def advance(self, dt: float) -> None:
        """Move along the waypoint script; the script cycles."""
        if not self.motion_script or self.motion_speed <= 0.0:
            return
        remaining = self.motion_speed * dt
        x, y = self.pose.x, self.pose.y
        while remaining > 1e-12:
            target = self.motion_script[self._waypoint_index % len(self.motion_script)]
            gap = dist((x, y), target)
            if gap <= remaining:
                x, y = target
                remaining -= gap
                self._waypoint_index += 1
                if gap <= 1e-12 and len(self.motion_script) == 1:
                    break
            else:
                x += (target[0] - x) / gap * remaining
                y += (target[1] - y) / gap * remaining
                remaining = 0.0
        heading = self.pose.heading
        nxt = self.motion_script[self._waypoint_index % len(self.motion_script)]
        if dist((x, y), nxt) > 1e-9:
            heading = bearing_deg((x, y), nxt)
        self.pose = Pose(x, y, heading)


@dataclass(frozen=True)
class FloorPlan:
    walls: tuple[Segment, ...]
    dock: Pose
    bounds: tuple[float, float, float, float]

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if xmax <= xmin or ymax <= ymin:
            raise WorldError(f"degenerate bounds: {self.bounds}")
        for seg in self.walls:
            if dist(seg[0], seg[1]) <= 0.0:
                raise WorldError(f"zero-length wall segment: {seg}")
        if not (xmin <= self.dock.x <= xmax and ymin <= self.dock.y <= ymax):
            raise WorldError("dock pose outside floorplan bounds")
        for seg in self.walls:
            if point_segment_distance(self.dock.position, seg[0], seg[1]) < ROBOT_RADIUS:
                raise WorldError("dock pose not in free space")


def load_floorplan(path: str) -> FloorPlan:
    """Load the JSON floorplan schema: walls, dock, bounds."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        walls = tuple(((w[0], w[1]), (w[2], w[3])) for w in raw["walls"])
        dock = Pose(raw["dock"][0], raw["dock"][1], raw["dock"][2])
        bounds = tuple(float(v) for v in raw["bounds"])
    except (KeyError, IndexError, TypeError) as exc:
        raise WorldError(f"malformed floorplan {path}: {exc}") from exc
    return FloorPlan(walls=walls, dock=dock, bounds=bounds)  # type: ignore[arg-type]


@dataclass(frozen=True)
class ProximityReading:
    distance: float
    saturated: bool


@dataclass(frozen=True)
class EntitySnapshot:
    id: str
    kind: str
    activity: str
    motion_speed: float
    distance: float
    bearing: float


@dataclass(frozen=True)
class FixtureRef:
    path: str


@dataclass(frozen=True)
class SyntheticScene:
    entities: tuple[EntitySnapshot, ...]
    clues: tuple[str, ...]


@dataclass(frozen=True)
class SceneFrame:
    seq: int
    sim_time: float
    wall_clock: str
    pose: Pose
    payload: FixtureRef | SyntheticScene


@dataclass(frozen=True)
class FixtureBinding:
    """Maps a capture slot to an image on disk.

    phase/index match the sweep or burst frame counter; an optional sim_time
    window further restricts when the binding applies.
    """

    path: str
    phase: str | None = None  # "sweep" | "burst" | None (any)
    index: int | None = None
    window: tuple[float, float] | None = None

    def matches(self, phase: str | None, index: int | None, sim_time: float) -> bool:
        if self.phase is not None and self.phase != phase:
            return False
        if self.index is not None and self.index != index:
            return False
        if self.window is not None and not (self.window[0] <= sim_time <= self.window[1]):
            return False
        return True


@dataclass(frozen=True)
class Clock:
    """Caller-owned simulated time: seconds since start plus HH:MM wall clock."""

    sim_time: float
    wall_clock: str


class World:
    """Mutable simulation state. Single writer; snapshot reads are values."""

    def __init__(
        self,
        plan: FloorPlan,
        robot_pose: Pose | None = None,
        entities: list[Entity] | None = None,
        context_tags: tuple[str, ...] = (),
        fixtures: tuple[FixtureBinding, ...] = (),
        robot_radius: float = ROBOT_RADIUS,
        proximity_range: float = PROXIMITY_MAX_RANGE,
        fov_deg: float = CAMERA_FOV_DEG,
        camera_range: float = CAMERA_RANGE_M,
    ):
        self.plan = plan
        self.robot_pose = robot_pose if robot_pose is not None else plan.dock
        self.entities: dict[str, Entity] = {}
        for ent in entities or []:
            self.add_entity(ent)
        self.context_tags = tuple(context_tags)
        self.fixtures = tuple(fixtures)
        self.robot_radius = robot_radius
        self.proximity_range = proximity_range
        self.fov_deg = fov_deg
        self.camera_range = camera_range
        self.linear = 0.0  # m/s along heading
        self.angular = 0.0  # deg/s, counter-clockwise
        self.collided = False  # set by the last step() when motion was truncated
        self._frame_seq = 0

    # -- entity management -------------------------------------------------

    def add_entity(self, ent: Entity) -> None:
        if ent.id in self.entities:
            raise WorldError(f"duplicate entity id {ent.id!r}")
        self.entities[ent.id] = ent

    def remove_entity(self, entity_id: str) -> None:
        if entity_id not in self.entities:
            raise WorldError(f"unknown entity id {entity_id!r}")
        del self.entities[entity_id]

    def set_drive(self, linear: float, angular: float) -> None:
        self.linear = linear
        self.angular = angular

    # -- integration --------------------------------------------------------

    def step(self, dt: float) -> None:
        """Advance the world by dt seconds.

        The robot turns first, then translates along its (new) heading.
        Translation is truncated at first contact with a wall or entity body;
        contact sets the collision flag and leaves penetration depth at zero.
        """
        if dt <= 0.0:
            raise WorldError("dt must be > 0")
        self.collided = False
        pose = self.robot_pose
        heading = normalize_heading(pose.heading + self.angular * dt)
        x, y = pose.x, pose.y
        if self.linear != 0.0:
            direction = heading_to_dir(heading if self.linear > 0 else normalize_heading(heading + 180.0))
            want = abs(self.linear) * dt
            allowed = self._free_travel((x, y), direction, want)
            if allowed < want:
                self.collided = True
            x += direction[0] * allowed
            y += direction[1] * allowed
            x, y = self._resolve_overlap((x, y), direction)
        self.robot_pose = Pose(x, y, heading)
        for ent in self.entities.values():
            ent.advance(dt)

    def _free_travel(self, origin: Vec, direction: Vec, want: float) -> float:
        best = want
        for seg in self.plan.walls:
            t = swept_circle_segment_contact(origin, direction, self.robot_radius, seg[0], seg[1])
            if t is not None and t < best:
                best = t
        for ent in self.entities.values():
            t = swept_circle_circle_contact(
                origin, direction, self.robot_radius, ent.pose.position, ent.body_radius
            )
            if t is not None and t < best:
                best = t
        return max(0.0, best)

    def _resolve_overlap(self, pos: Vec, direction: Vec) -> Vec:
        # Push out along each offending wall's normal; guards against the
        # float error of grazing-incidence contact solves.
        x, y = pos
        for _ in range(8):
            moved = False
            for seg in self.plan.walls:
                cx, cy = closest_point_on_segment((x, y), seg[0], seg[1])
                nx, ny = x - cx, y - cy
                d = math.hypot(nx, ny)
                if d >= self.robot_radius:
                    continue
                moved = True
                if d < 1e-12:
                    x -= direction[0] * (self.robot_radius + 1e-12)
                    y -= direction[1] * (self.robot_radius + 1e-12)
                else:
                    push = (self.robot_radius - d) + 1e-12
                    x += nx / d * push
                    y += ny / d * push
            if not moved:
                break
        return (x, y)

    # -- sensing ------------------------------------------------------------

    def raycast_proximity(self, pose: Pose | None = None) -> ProximityReading:
        """Single forward ray; distance measured from the robot's leading edge."""
        pose = pose or self.robot_pose
        direction = heading_to_dir(pose.heading)
        origin = pose.position
        best: float | None = None
        for seg in self.plan.walls:
            t = ray_segment_intersection(origin, direction, seg[0], seg[1])
            if t is not None and (best is None or t < best):
                best = t
        for ent in self.entities.values():
            t = ray_circle_intersection(origin, direction, ent.pose.position, ent.body_radius)
            if t is not None and (best is None or t < best):
                best = t
        if best is None:
            return ProximityReading(self.proximity_range, True)
        reading = best - self.robot_radius
        if reading >= self.proximity_range:
            return ProximityReading(self.proximity_range, True)
        return ProximityReading(max(reading, 0.0), False)

    def visible_entities(
        self, pose: Pose | None = None, fov_deg: float | None = None, range_m: float | None = None
    ) -> list[EntitySnapshot]:
        """Entities inside the camera cone with unobstructed line of sight."""
        pose = pose or self.robot_pose
        fov = self.fov_deg if fov_deg is None else fov_deg
        if not (0.0 < fov <= 180.0):
            raise WorldError(f"fov_deg out of range: {fov}")
        rng = self.camera_range if range_m is None else range_m
        if rng <= 0.0:
            raise WorldError("range_m must be > 0")
        out: list[EntitySnapshot] = []
        origin = pose.position
        for ent in sorted(self.entities.values(), key=lambda e: e.id):
            gap = dist(origin, ent.pose.position)
            if gap > rng:
                continue
            bearing = bearing_deg(origin, ent.pose.position)
            if abs(angle_diff_deg(bearing, pose.heading)) > fov / 2.0:
                continue
            if any(
                segments_intersect(origin, ent.pose.position, seg[0], seg[1])
                for seg in self.plan.walls
            ):
                continue
            out.append(
                EntitySnapshot(
                    id=ent.id,
                    kind=ent.kind,
                    activity=ent.activity,
                    motion_speed=ent.motion_speed,
                    distance=gap,
                    bearing=bearing,
                )
            )
        return out

    def detect_collision(self, pose: Pose | None = None) -> bool:
        """Strict body overlap with any wall or entity circle."""
        pose = pose or self.robot_pose
        for seg in self.plan.walls:
            if point_segment_distance(pose.position, seg[0], seg[1]) < self.robot_radius:
                return True
        for ent in self.entities.values():
            if dist(pose.position, ent.pose.position) < self.robot_radius + ent.body_radius:
                return True
        return False

    def capture_frame(
        self,
        pose: Pose | None = None,
        clock: Clock | None = None,
        phase: str | None = None,
        index: int | None = None,
    ) -> SceneFrame:
        """Produce one observation frame at the given pose and clock.

        A matching fixture binding yields an image reference; otherwise the
        payload is a synthetic description of the visible scene.
        """
        pose = pose or self.robot_pose
        clock = clock or Clock(0.0, "00:00")
        payload: FixtureRef | SyntheticScene
        binding = next(
            (b for b in self.fixtures if b.matches(phase, index, clock.sim_time)), None
        )
        if binding is not None:
            if not os.path.exists(binding.path):
                raise FrameCaptureError(binding.path)
            payload = FixtureRef(binding.path)
        else:
            payload = SyntheticScene(
                entities=tuple(self.visible_entities(pose)), clues=self.context_tags
            )
        frame = SceneFrame(
            seq=self._frame_seq,
            sim_time=clock.sim_time,
            wall_clock=clock.wall_clock,
            pose=pose,
            payload=payload,
        )
        self._frame_seq += 1
        return frame

    # -- snapshots ----------------------------------------------------------

    def snapshot_entities(self) -> tuple[EntitySnapshot, ...]:
        origin = self.robot_pose.position
        return tuple(
            EntitySnapshot(
                id=e.id,
                kind=e.kind,
                activity=e.activity,
                motion_speed=e.motion_speed,
                distance=dist(origin, e.pose.position),
                bearing=bearing_deg(origin, e.pose.position),
            )
            for e in sorted(self.entities.values(), key=lambda e: e.id)
        )

    def set_robot_pose(self, pose: Pose) -> None:
        self.robot_pose = pose

    def nudge_heading(self, delta: float) -> None:
        self.robot_pose = replace(
            self.robot_pose, heading=normalize_heading(self.robot_pose.heading + delta)
        )
