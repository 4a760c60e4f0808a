"""Prompt composition: the three-part system prompt and per-stage user
content for the chat-completions wire format."""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Mapping

from ..controller import Mode, tokens_for_mode
from ..world import FixtureRef, SceneFrame, SyntheticScene
from .features import ExtractedFeatures
from .records import ASPECT_HEADINGS

DEFAULT_ROLE = "You are a value-aware vacuum cleaner."

DEFAULT_OBJECTIVE = (
    "Your objective is to maintain cleanliness while respecting the homeowner's "
    "values, ensuring a comfortable and harmonious living environment."
)

MODE_ORDER = (Mode.OBSERVATION, Mode.CLEANING, Mode.DOCKING)

DEFAULT_MODE_DESCRIPTIONS: dict[str, str] = {
    "observation": (
        "In observation mode you rotate in place and capture a series of still "
        "frames covering half the room, then decide whether to clean now, wait "
        "and re-observe later, or return to the dock."
    ),
    "cleaning": (
        "In cleaning mode you vacuum by driving in straight lines, slowing near "
        "obstacles and turning away after contact, while periodically capturing "
        "short frame bursts to check whether cleaning should be interrupted."
    ),
    "docking": (
        "In docking mode you drive back to the charging station and stay there "
        "until an operator releases you."
    ),
}


class PromptConfigError(Exception):
    """A required prompt part is missing or empty."""


def compose_system_prompt(
    mode_descriptions: Mapping[str, str] | None = None,
    role: str = DEFAULT_ROLE,
    objective: str = DEFAULT_OBJECTIVE,
) -> str:
    """Build the three-part system prompt: role, objective, mode behaviors.

    Mode descriptions always render in observation, cleaning, docking order
    regardless of the mapping's own ordering.
    """
    descriptions = dict(DEFAULT_MODE_DESCRIPTIONS)
    if mode_descriptions:
        descriptions.update(mode_descriptions)
    if not role.strip():
        raise PromptConfigError("role must be non-empty")
    if not objective.strip():
        raise PromptConfigError("objective must be non-empty")
    lines = [role, objective, "Operating modes:"]
    for mode in MODE_ORDER:
        text = descriptions.get(mode.value, "")
        if not text or not text.strip():
            raise PromptConfigError(f"missing description for mode {mode.value!r}")
        lines.append(f"- {mode.value}: {text}")
    return "\n".join(lines)


def decision_grammar(mode: Mode) -> str:
    tokens = " or ".join(sorted(t.value for t in tokens_for_mode(mode)))
    return (
        "End your answer with a single line of the exact form "
        f"'DECISION: <TOKEN>' where <TOKEN> is one of {tokens}."
    )


@dataclass(frozen=True)
class PromptBundle:
    """Everything one evaluation sends to the model."""

    system_prompt: str
    features: ExtractedFeatures
    frames: tuple[SceneFrame, ...]
    wall_clock: str
    mode: Mode

    @property
    def decision_grammar(self) -> str:
        return decision_grammar(self.mode)


EXTRACT_INSTRUCTION = (
    "Extract the salient elements from each frame below, focusing on the "
    "presence of people or pets, human activities, and contextual clues. "
    "Answer with JSON only, shaped as "
    '{"frames": [{"people": [{"id": str, "activity": str}], '
    '"pets": [{"id": str, "motion_speed": number}], "clues": [str]}]} '
    "with one entry per frame, in order."
)

REASONING_INSTRUCTION = (
    "Reason step by step under exactly these headings, one per line:\n"
    + "\n".join(
        f"{ASPECT_HEADINGS[field]}: ..."
        for field in (
            "value_alignment",
            "time_context",
            "action_choice_and_consequences",
            "rationale",
            "purpose_reflection",
        )
    )
    + "\nValue alignment covers creating a safe and enjoyable environment for "
    "the house owners; purpose reflection covers how the choice reflects your "
    "core purpose of cleaning."
)

FINALIZE_INSTRUCTION = (
    "Here is your own step-by-step reasoning about the current scene. "
    "Review it and commit to a final decision."
)

SUMMARIZE_INSTRUCTION = (
    "Summarize the reasoning and decision below into one short, user-friendly "
    "paragraph of at most 500 characters. Do not include any 'DECISION:' line."
)


def describe_frame(frame: SceneFrame) -> str:
    """Deterministic plain-text rendering of a synthetic frame payload."""
    head = f"frame seq={frame.seq} t={frame.sim_time:.2f}s heading={frame.pose.heading:.1f}deg"
    payload = frame.payload
    if isinstance(payload, FixtureRef):
        return f"{head} [image attached]"
    assert isinstance(payload, SyntheticScene)
    if not payload.entities:
        body = "the room appears empty"
    else:
        parts = []
        for snap in payload.entities:
            parts.append(
                f"{snap.kind} {snap.id} activity={snap.activity or 'none'} "
                f"motion={snap.motion_speed:.2f}m/s at {snap.distance:.2f}m"
            )
        body = "; ".join(parts)
    if payload.clues:
        body += " | clues: " + ", ".join(payload.clues)
    return f"{head}: {body}"


def _image_part(path: str) -> dict:
    with open(path, "rb") as fh:
        data = base64.b64encode(fh.read()).decode("ascii")
    suffix = path.rsplit(".", 1)[-1].lower()
    mime = {"png": "image/png", "jpg": "image/jpeg", "jpeg": "image/jpeg"}.get(suffix, "image/png")
    return {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{data}"}}


def frame_content_parts(frames: tuple[SceneFrame, ...]) -> list[dict]:
    """Frames as chat-completions content parts: images for fixture payloads,
    text blocks for synthetic scenes."""
    parts: list[dict] = []
    for frame in frames:
        parts.append({"type": "text", "text": describe_frame(frame)})
        if isinstance(frame.payload, FixtureRef):
            parts.append(_image_part(frame.payload.path))
    return parts


def _context_lines(bundle: PromptBundle) -> str:
    return f"Current time: {bundle.wall_clock}\nCurrent mode: {bundle.mode.value}"


def features_summary(features: ExtractedFeatures) -> str:
    if not features.entities:
        lines = ["No people or pets observed."]
    else:
        lines = []
        for ent in features.entities:
            flag = " (transient, already left)" if ent.transient else ""
            lines.append(
                f"- {ent.kind} {ent.id}: activity={ent.activity or 'none'}, "
                f"motion={ent.motion_speed:.2f}m/s, "
                f"seen in {ent.presence_ratio:.0%} of frames{flag}"
            )
    if features.clues:
        lines.append("Contextual clues: " + ", ".join(features.clues))
    return "\n".join(lines)


def extract_user_content(frames: tuple[SceneFrame, ...], wall_clock: str) -> list[dict]:
    parts = [{"type": "text", "text": f"{EXTRACT_INSTRUCTION}\nCurrent time: {wall_clock}"}]
    parts.extend(frame_content_parts(frames))
    return parts


def reason_user_content(bundle: PromptBundle) -> list[dict]:
    text = (
        f"{_context_lines(bundle)}\n"
        f"Observed elements:\n{features_summary(bundle.features)}\n\n"
        f"{REASONING_INSTRUCTION}"
    )
    parts = [{"type": "text", "text": text}]
    parts.extend(frame_content_parts(bundle.frames))
    return parts


def finalize_user_content(bundle: PromptBundle, trace_raw_text: str) -> list[dict]:
    text = (
        f"{_context_lines(bundle)}\n"
        f"{FINALIZE_INSTRUCTION}\n\n"
        f"{trace_raw_text}\n\n"
        f"{bundle.decision_grammar}"
    )
    return [{"type": "text", "text": text}]


def summarize_user_content(trace_raw_text: str, decision_token: str) -> list[dict]:
    text = f"{SUMMARIZE_INSTRUCTION}\n\n{trace_raw_text}\n\nFinal decision: {decision_token}"
    return [{"type": "text", "text": text}]
