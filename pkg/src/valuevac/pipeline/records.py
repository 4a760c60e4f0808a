"""Reasoning traces and the full per-decision record that lands in the log."""

from __future__ import annotations

from dataclasses import dataclass

from ..controller import Decision, DecisionSource, DecisionToken, Mode
from .features import ExtractedFeatures

# Aspect order follows the reasoning instruction given to the model.
ASPECT_FIELDS = (
    "value_alignment",
    "time_context",
    "action_choice_and_consequences",
    "rationale",
    "purpose_reflection",
)

ASPECT_HEADINGS = {
    "value_alignment": "Value alignment",
    "time_context": "Time context",
    "action_choice_and_consequences": "Action choice and consequences",
    "rationale": "Rationale",
    "purpose_reflection": "Purpose reflection",
}


@dataclass(frozen=True)
class ReasoningTrace:
    value_alignment: str
    time_context: str
    action_choice_and_consequences: str
    rationale: str
    purpose_reflection: str
    raw_text: str

    def complete(self) -> bool:
        return all(getattr(self, f).strip() for f in ASPECT_FIELDS)

    def aspects(self) -> dict[str, str]:
        return {f: getattr(self, f) for f in ASPECT_FIELDS}

    @classmethod
    def empty(cls) -> "ReasoningTrace":
        return cls("", "", "", "", "", "")

    @classmethod
    def from_aspects(cls, aspects: dict[str, str], raw_text: str | None = None) -> "ReasoningTrace":
        raw = raw_text
        if raw is None:
            raw = "\n".join(
                f"{ASPECT_HEADINGS[f]}: {aspects.get(f, '')}" for f in ASPECT_FIELDS
            )
        return cls(
            value_alignment=aspects.get("value_alignment", ""),
            time_context=aspects.get("time_context", ""),
            action_choice_and_consequences=aspects.get("action_choice_and_consequences", ""),
            rationale=aspects.get("rationale", ""),
            purpose_reflection=aspects.get("purpose_reflection", ""),
            raw_text=raw,
        )


STAGE_NAMES = ("extract", "reason", "finalize", "summarize")


@dataclass
class DecisionRecord:
    decision: Decision
    mode: Mode
    features: ExtractedFeatures
    trace: ReasoningTrace
    summary: str
    latencies_ms: dict[str, float]
    total_ms: float
    backend_id: str
    frame_seqs: tuple[int, ...]

    def to_payload(self) -> dict:
        return {
            "decision": {"token": self.decision.token.value, "source": self.decision.source.value},
            "mode": self.mode.value,
            "features": self.features.to_payload(),
            "trace": {**self.trace.aspects(), "raw_text": self.trace.raw_text},
            "summary": self.summary,
            "latencies_ms": {k: self.latencies_ms.get(k, 0.0) for k in STAGE_NAMES},
            "total_ms": self.total_ms,
            "backend_id": self.backend_id,
            "frame_seqs": list(self.frame_seqs),
        }

    @classmethod
    def from_payload(cls, raw: dict) -> "DecisionRecord":
        trace_raw = dict(raw.get("trace", {}))
        raw_text = trace_raw.pop("raw_text", "")
        return cls(
            decision=Decision(
                DecisionToken(raw["decision"]["token"]),
                DecisionSource(raw["decision"]["source"]),
            ),
            mode=Mode(raw["mode"]),
            features=ExtractedFeatures.from_payload(raw.get("features", {})),
            trace=ReasoningTrace.from_aspects(trace_raw, raw_text=raw_text),
            summary=raw.get("summary", ""),
            latencies_ms=dict(raw.get("latencies_ms", {})),
            total_ms=float(raw.get("total_ms", 0.0)),
            backend_id=raw.get("backend_id", ""),
            frame_seqs=tuple(raw.get("frame_seqs", [])),
        )
