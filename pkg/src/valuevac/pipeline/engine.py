"""Pipeline orchestration: extract, reason, finalize, summarize.

Every stage is timeout-bounded and retried; any failure path terminates in a
safe-default decision rather than an exception, so the controller above is
never stalled by a misbehaving backend.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

from ..controller import Decision, DecisionSource, Mode, safe_default_for
from ..world import SceneFrame
from .backends import BackendError, HttpChatBackend, MockBackend
from .features import (
    ExtractedFeatures,
    FeatureParseError,
    aggregate_features,
    features_from_frames,
    parse_extraction_response,
)
from .mock import mock_decide
from .parser import ParseFailure, parse_decision
from .prompts import (
    DEFAULT_MODE_DESCRIPTIONS,
    DEFAULT_OBJECTIVE,
    DEFAULT_ROLE,
    PromptBundle,
    compose_system_prompt,
    extract_user_content,
    finalize_user_content,
    reason_user_content,
    summarize_user_content,
)
from .records import ASPECT_FIELDS, ASPECT_HEADINGS, DecisionRecord, ReasoningTrace

SUMMARY_MAX_CHARS = 600
PIPELINE_STAGES = 4


@dataclass
class PromptConfig:
    role: str = DEFAULT_ROLE
    objective: str = DEFAULT_OBJECTIVE
    mode_descriptions: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_MODE_DESCRIPTIONS))


class _StageFailed(Exception):
    pass


_HEADING_RES = {
    name: re.compile(rf"^[\s#*>-]*{re.escape(ASPECT_HEADINGS[name])}\s*:\s*(.*)$", re.IGNORECASE)
    for name in ASPECT_FIELDS
}


def parse_trace(text: str) -> tuple[dict[str, str], list[str]]:
    """Split model output into the five reasoning aspects.

    Returns (aspects, missing-field-names). Text under a heading runs until
    the next recognized heading.
    """
    aspects: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        matched = False
        for name, pattern in _HEADING_RES.items():
            m = pattern.match(line)
            if m:
                current = name
                aspects[name] = [m.group(1).strip()] if m.group(1).strip() else []
                matched = True
                break
        if not matched and current is not None and line.strip():
            aspects[current].append(line.strip())
    flat = {name: " ".join(parts).strip() for name, parts in aspects.items()}
    missing = [name for name in ASPECT_FIELDS if not flat.get(name)]
    return flat, missing


def truncate_at_sentence(text: str, limit: int) -> str:
    """Hard cap at `limit` characters, preferring the last sentence boundary."""
    if len(text) <= limit:
        return text
    clipped = text[:limit]
    for punct in (". ", "! ", "? "):
        idx = clipped.rfind(punct)
        if idx > limit // 3:
            return clipped[: idx + 1].rstrip()
    idx = max(clipped.rfind("."), clipped.rfind("!"), clipped.rfind("?"))
    if idx > limit // 3:
        return clipped[: idx + 1].rstrip()
    return clipped.rstrip()


_DECISION_LINE_RE = re.compile(r"^\s*decision\s*:.*$", re.IGNORECASE | re.MULTILINE)


class PipelineEngine:
    """One engine per backend; evaluations are independent jobs."""

    def __init__(
        self,
        backend: MockBackend | HttpChatBackend,
        prompt_config: PromptConfig | None = None,
        stage_timeout: float | None = None,
        max_retries: int | None = None,
    ):
        self.backend = backend
        self.prompts = prompt_config or PromptConfig()
        self.stage_timeout = (
            stage_timeout if stage_timeout is not None else backend.descriptor.timeout_s
        )
        self.max_retries = (
            max_retries if max_retries is not None else backend.descriptor.max_retries
        )
        self.system_prompt = compose_system_prompt(
            self.prompts.mode_descriptions, role=self.prompts.role, objective=self.prompts.objective
        )

    @property
    def deterministic(self) -> bool:
        return getattr(self.backend, "deterministic", False)

    def evaluation_budget_s(self) -> float:
        """Worst-case wall time before a (safe default) decision exists."""
        return self.stage_timeout * (self.max_retries + 1) * PIPELINE_STAGES

    # -- public entry ---------------------------------------------------------

    def evaluate(
        self,
        frames: list[SceneFrame],
        mode: Mode,
        blocked_cycles: int = 0,
        wall_clock: str = "00:00",
    ) -> DecisionRecord:
        if not frames:
            raise ValueError("evaluate requires at least one frame")
        if isinstance(self.backend, MockBackend):
            return self._evaluate_mock(frames, mode, blocked_cycles)
        return self._evaluate_chat(frames, mode, blocked_cycles, wall_clock)

    def _evaluate_mock(
        self, frames: list[SceneFrame], mode: Mode, blocked_cycles: int
    ) -> DecisionRecord:
        # Deterministic backend: latencies are reported as zero so replayed
        # runs serialize byte-identically.
        features = features_from_frames(frames)
        decision, trace, summary = mock_decide(features, mode, blocked_cycles)
        latencies = {"extract": 0.0, "reason": 0.0, "finalize": 0.0, "summarize": 0.0}
        return DecisionRecord(
            decision=decision,
            mode=mode,
            features=features,
            trace=trace,
            summary=summary,
            latencies_ms=latencies,
            total_ms=0.0,
            backend_id=self.backend.descriptor.backend_id,
            frame_seqs=tuple(f.seq for f in frames),
        )

    def _evaluate_chat(
        self, frames: list[SceneFrame], mode: Mode, blocked_cycles: int, wall_clock: str
    ) -> DecisionRecord:
        start = time.perf_counter()
        deadline = start + self.evaluation_budget_s()
        latencies = {"extract": 0.0, "reason": 0.0, "finalize": 0.0, "summarize": 0.0}
        frame_seqs = tuple(f.seq for f in frames)

        def record(decision: Decision, features, trace, summary) -> DecisionRecord:
            total = (time.perf_counter() - start) * 1000.0
            return DecisionRecord(
                decision=decision,
                mode=mode,
                features=features,
                trace=trace,
                summary=summary,
                latencies_ms=latencies,
                total_ms=total,
                backend_id=self.backend.descriptor.backend_id,
                frame_seqs=frame_seqs,
            )

        empty_features = ExtractedFeatures(frames=(), entities=(), clues=())

        # Stage 1: extraction
        t0 = time.perf_counter()
        try:
            features = self._extract(frames, wall_clock, deadline)
        except _StageFailed:
            latencies["extract"] = (time.perf_counter() - t0) * 1000.0
            return record(safe_default_for(mode), empty_features, ReasoningTrace.empty(), "")
        latencies["extract"] = (time.perf_counter() - t0) * 1000.0

        bundle = PromptBundle(
            system_prompt=self.system_prompt,
            features=features,
            frames=tuple(frames),
            wall_clock=wall_clock,
            mode=mode,
        )

        # Stage 2: step-by-step reasoning
        t0 = time.perf_counter()
        try:
            trace = self._reason(bundle, deadline)
        except _StageFailed:
            latencies["reason"] = (time.perf_counter() - t0) * 1000.0
            return record(safe_default_for(mode), features, ReasoningTrace.empty(), "")
        latencies["reason"] = (time.perf_counter() - t0) * 1000.0

        # Stage 3: trace feedback, final decision
        t0 = time.perf_counter()
        decision = self._finalize(bundle, trace, deadline)
        latencies["finalize"] = (time.perf_counter() - t0) * 1000.0
        if decision.source is DecisionSource.SAFE_DEFAULT:
            return record(decision, features, trace, "")

        # Stage 4: user-facing summary
        t0 = time.perf_counter()
        summary = self._summarize(trace, decision, deadline)
        latencies["summarize"] = (time.perf_counter() - t0) * 1000.0
        return record(decision, features, trace, summary)

    # -- stages ----------------------------------------------------------------

    def _call(self, user_content, deadline: float) -> str:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            raise _StageFailed("evaluation budget exhausted")
        timeout = min(self.stage_timeout, remaining)
        return self.backend.chat(self.system_prompt, user_content, timeout)

    def _call_with_retries(self, user_content, deadline: float) -> str:
        last: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                return self._call(user_content, deadline)
            except _StageFailed:
                raise
            except BackendError as exc:
                last = exc
        raise _StageFailed(str(last))

    def _extract(self, frames, wall_clock: str, deadline: float) -> ExtractedFeatures:
        content = extract_user_content(tuple(frames), wall_clock)
        last: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                text = self._call(content, deadline)
                per_frame = parse_extraction_response(text, len(frames))
                return aggregate_features(per_frame)
            except _StageFailed:
                raise
            except (BackendError, FeatureParseError) as exc:
                last = exc
        raise _StageFailed(str(last))

    def _reason(self, bundle: PromptBundle, deadline: float) -> ReasoningTrace:
        content = reason_user_content(bundle)
        text = self._call_with_retries(content, deadline)
        aspects, missing = parse_trace(text)
        if missing:
            reminder = list(content)
            reminder.append(
                {
                    "type": "text",
                    "text": (
                        "Your previous answer was missing these headings: "
                        + ", ".join(ASPECT_HEADINGS[m] for m in missing)
                        + ". Answer again with every heading present."
                    ),
                }
            )
            try:
                text = self._call(reminder, deadline)
            except BackendError as exc:
                raise _StageFailed(str(exc)) from exc
            aspects, missing = parse_trace(text)
            if missing:
                raise _StageFailed(f"reasoning aspects missing: {missing}")
        return ReasoningTrace.from_aspects(aspects, raw_text=text)

    def _finalize(self, bundle: PromptBundle, trace: ReasoningTrace, deadline: float) -> Decision:
        content = finalize_user_content(bundle, trace.raw_text)
        for _ in range(self.max_retries + 1):
            try:
                text = self._call(content, deadline)
            except _StageFailed:
                break
            except BackendError:
                continue
            try:
                return parse_decision(text, bundle.mode)
            except ParseFailure:
                continue
        return safe_default_for(bundle.mode)

    def _summarize(self, trace: ReasoningTrace, decision: Decision, deadline: float) -> str:
        content = summarize_user_content(trace.raw_text, decision.token.value)
        fallback = truncate_at_sentence(
            f"{trace.rationale} Final choice: {decision.token.value.lower()}.", SUMMARY_MAX_CHARS
        )
        try:
            text = self._call_with_retries(content, deadline)
        except _StageFailed:
            return fallback
        text = _DECISION_LINE_RE.sub("", text).strip()
        if len(text) > SUMMARY_MAX_CHARS:
            retry = list(content)
            retry.append(
                {
                    "type": "text",
                    "text": f"Too long. Rewrite in under {SUMMARY_MAX_CHARS - 100} characters.",
                }
            )
            try:
                text = _DECISION_LINE_RE.sub("", self._call(retry, deadline)).strip()
            except (BackendError, _StageFailed):
                pass
            text = truncate_at_sentence(text, SUMMARY_MAX_CHARS)
        return text or fallback
