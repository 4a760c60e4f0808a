"""Log self-consistency: re-derive the mode timeline purely from logged
decisions and overrides and check it against the logged mode changes."""

from __future__ import annotations

from ..controller import Decision, DecisionSource, DecisionToken, Mode, TransitionError, transition
from ..gateway.logstore import LogRecord, read_log


class ReplayIntegrityError(Exception):
    def __init__(self, record_id: int, message: str):
        super().__init__(f"record {record_id}: {message}")
        self.record_id = record_id


def _decision_from_payload(rec: LogRecord) -> Decision:
    raw = rec.payload.get("decision")
    if not isinstance(raw, dict):
        raise ReplayIntegrityError(rec.id, "decision record without decision payload")
    try:
        return Decision(DecisionToken(raw["token"]), DecisionSource(raw["source"]))
    except (KeyError, ValueError) as exc:
        raise ReplayIntegrityError(rec.id, f"malformed decision payload: {exc}") from exc


def replay_records(records: list[LogRecord]) -> list[dict]:
    """Reconstruct the mode timeline and verify the log agrees with itself.

    Checks, in order of the log: every decision/override whose transition
    changes the mode is followed by exactly one matching mode_change record
    citing it as cause; no mode_change appears without such a cause; the
    starting mode comes from the run_started event.
    """
    mode = Mode.OBSERVATION
    for rec in records:
        if rec.kind == "event" and rec.payload.get("event") == "run_started":
            mode = Mode(rec.payload.get("mode", Mode.OBSERVATION.value))
            break
    timeline: list[dict] = [{"record_id": 0, "sim_time": 0.0, "mode": mode.value}]
    expected_change: tuple[int, Mode, Mode] | None = None  # (cause id, from, to)

    for rec in records:
        if rec.kind in ("decision", "override"):
            if expected_change is not None:
                raise ReplayIntegrityError(
                    rec.id, f"missing mode_change for record {expected_change[0]}"
                )
            decision = _decision_from_payload(rec)
            try:
                target = transition(mode, decision)
            except TransitionError as exc:
                if rec.kind == "override":
                    # rejected overrides are logged as errors, not overrides
                    raise ReplayIntegrityError(rec.id, f"invalid override in log: {exc}")
                raise ReplayIntegrityError(rec.id, f"decision invalid for mode {mode.value}")
            if target is not mode:
                expected_change = (rec.id, mode, target)
        elif rec.kind == "mode_change":
            frm = rec.payload.get("from")
            to = rec.payload.get("to")
            cause = rec.payload.get("cause")
            if expected_change is None:
                raise ReplayIntegrityError(rec.id, "mode_change without a causing decision")
            cause_id, exp_from, exp_to = expected_change
            if cause != cause_id:
                raise ReplayIntegrityError(
                    rec.id, f"mode_change cause {cause} != expected {cause_id}"
                )
            if frm != exp_from.value or to != exp_to.value:
                raise ReplayIntegrityError(
                    rec.id,
                    f"mode_change {frm}->{to} diverges from derived "
                    f"{exp_from.value}->{exp_to.value}",
                )
            mode = exp_to
            expected_change = None
            timeline.append({"record_id": rec.id, "sim_time": rec.sim_time, "mode": mode.value})
    if expected_change is not None:
        raise ReplayIntegrityError(
            expected_change[0], "log ends with an unapplied mode transition"
        )
    return timeline


def replay_log(path: str) -> list[dict]:
    return replay_records(read_log(path))
