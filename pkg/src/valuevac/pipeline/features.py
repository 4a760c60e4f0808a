"""Salient-feature extraction: per-frame observations plus aggregate
presence ratios and transient-visitor flags."""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..world import PERSON_KIND, PET_KIND, SceneFrame, SyntheticScene

TRANSIENT_RATIO = 0.5


class FeatureParseError(Exception):
    """Backend extraction output could not be parsed."""


@dataclass(frozen=True)
class FrameFeatures:
    people: tuple[tuple[str, str], ...]  # (id, activity)
    pets: tuple[tuple[str, float], ...]  # (id, motion_speed)
    clues: tuple[str, ...]

    def entity_ids(self) -> set[str]:
        return {pid for pid, _ in self.people} | {pid for pid, _ in self.pets}


@dataclass(frozen=True)
class EntityAggregate:
    id: str
    kind: str
    activity: str
    motion_speed: float
    presence_ratio: float
    transient: bool


@dataclass(frozen=True)
class ExtractedFeatures:
    frames: tuple[FrameFeatures, ...]
    entities: tuple[EntityAggregate, ...]
    clues: tuple[str, ...]

    def presence_ratio(self, entity_id: str) -> float:
        for ent in self.entities:
            if ent.id == entity_id:
                return ent.presence_ratio
        return 0.0

    def transient_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.entities if e.transient)

    def to_payload(self) -> dict:
        return {
            "frames": [
                {
                    "people": [list(p) for p in f.people],
                    "pets": [list(p) for p in f.pets],
                    "clues": list(f.clues),
                }
                for f in self.frames
            ],
            "entities": [
                {
                    "id": e.id,
                    "kind": e.kind,
                    "activity": e.activity,
                    "motion_speed": e.motion_speed,
                    "presence_ratio": e.presence_ratio,
                    "transient": e.transient,
                }
                for e in self.entities
            ],
            "clues": list(self.clues),
        }

    @classmethod
    def from_payload(cls, raw: dict) -> "ExtractedFeatures":
        frames = tuple(
            FrameFeatures(
                people=tuple((p[0], p[1]) for p in f.get("people", [])),
                pets=tuple((p[0], float(p[1])) for p in f.get("pets", [])),
                clues=tuple(f.get("clues", [])),
            )
            for f in raw.get("frames", [])
        )
        entities = tuple(
            EntityAggregate(
                id=e["id"],
                kind=e["kind"],
                activity=e.get("activity", ""),
                motion_speed=float(e.get("motion_speed", 0.0)),
                presence_ratio=float(e.get("presence_ratio", 0.0)),
                transient=bool(e.get("transient", False)),
            )
            for e in raw.get("entities", [])
        )
        return cls(frames=frames, entities=entities, clues=tuple(raw.get("clues", [])))


def aggregate_features(per_frame: list[FrameFeatures]) -> ExtractedFeatures:
    """Fold per-frame observations into entity aggregates.

    presence_ratio = frames containing the entity / total frames. An entity
    is transient when its ratio is below one half and it is absent from the
    final frame.
    """
    total = len(per_frame)
    seen: dict[str, dict] = {}
    for feats in per_frame:
        for pid, activity in feats.people:
            info = seen.setdefault(pid, {"kind": PERSON_KIND, "activity": "", "speed": 0.0, "count": 0})
            info["count"] += 1
            info["activity"] = activity
        for pid, speed in feats.pets:
            info = seen.setdefault(pid, {"kind": PET_KIND, "activity": "", "speed": 0.0, "count": 0})
            info["count"] += 1
            info["speed"] = max(info["speed"], speed)
    final_ids = per_frame[-1].entity_ids() if per_frame else set()
    entities = []
    for pid in sorted(seen):
        info = seen[pid]
        ratio = info["count"] / total if total else 0.0
        entities.append(
            EntityAggregate(
                id=pid,
                kind=info["kind"],
                activity=info["activity"],
                motion_speed=info["speed"],
                presence_ratio=ratio,
                transient=ratio < TRANSIENT_RATIO and pid not in final_ids,
            )
        )
    clues: list[str] = []
    for feats in per_frame:
        for clue in feats.clues:
            if clue not in clues:
                clues.append(clue)
    return ExtractedFeatures(frames=tuple(per_frame), entities=tuple(entities), clues=tuple(clues))


def frame_features_from_scene(frame: SceneFrame) -> FrameFeatures:
    """Synthetic payloads map directly; image payloads contribute nothing
    without a vision backend."""
    payload = frame.payload
    if not isinstance(payload, SyntheticScene):
        return FrameFeatures(people=(), pets=(), clues=())
    people = tuple(
        (snap.id, snap.activity) for snap in payload.entities if snap.kind == PERSON_KIND
    )
    pets = tuple(
        (snap.id, snap.motion_speed) for snap in payload.entities if snap.kind == PET_KIND
    )
    return FrameFeatures(people=people, pets=pets, clues=payload.clues)


def features_from_frames(frames: list[SceneFrame]) -> ExtractedFeatures:
    """Local extraction used by the deterministic mock backend."""
    return aggregate_features([frame_features_from_scene(f) for f in frames])


def parse_extraction_response(text: str, frame_count: int) -> list[FrameFeatures]:
    """Parse the JSON the model was asked to emit for the extraction stage."""
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        raise FeatureParseError("no JSON object in extraction response")
    try:
        raw = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise FeatureParseError(f"bad extraction JSON: {exc}") from exc
    frames_raw = raw.get("frames")
    if not isinstance(frames_raw, list):
        raise FeatureParseError("extraction JSON missing 'frames' list")
    out: list[FrameFeatures] = []
    for i, fr in enumerate(frames_raw[:frame_count]):
        if not isinstance(fr, dict):
            raise FeatureParseError(f"frame {i} is not an object")
        people = []
        for j, person in enumerate(fr.get("people", [])):
            pid = person.get("id") or f"person_{j}"
            people.append((str(pid), str(person.get("activity", ""))))
        pets = []
        for j, pet in enumerate(fr.get("pets", [])):
            pid = pet.get("id") or f"pet_{j}"
            try:
                speed = float(pet.get("motion_speed", 0.0))
            except (TypeError, ValueError):
                speed = 0.0
            pets.append((str(pid), speed))
        clues = tuple(str(c) for c in fr.get("clues", []))
        out.append(FrameFeatures(people=tuple(people), pets=tuple(pets), clues=clues))
    while len(out) < frame_count:
        out.append(FrameFeatures(people=(), pets=(), clues=()))
    return out
