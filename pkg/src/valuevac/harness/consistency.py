"""Repeated-trial consistency evaluation: decision histograms, agreement
rate, and per-stage latency statistics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..controller import DecisionToken, Mode
from ..pipeline.backends import BackendDescriptor
from ..pipeline.records import STAGE_NAMES, DecisionRecord
from .runner import ScenarioRunner
from .scenario import Scenario


def agreement_rate(decisions: list[DecisionToken] | list[str]) -> float:
    """Largest share of identical decisions: max count over total."""
    if not decisions:
        raise ValueError("agreement_rate requires at least one decision")
    counts: dict[str, int] = {}
    for d in decisions:
        key = d.value if isinstance(d, DecisionToken) else str(d)
        counts[key] = counts.get(key, 0) + 1
    return max(counts.values()) / len(decisions)


def percentile_nearest_rank(values: list[float], pct: float) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass
class ConsistencyReport:
    scenario: str
    trials: int
    histogram: dict[str, int]
    agreement_rate: float
    latency_ms: dict[str, dict[str, float]] = field(default_factory=dict)
    backend_id: str = ""

    def to_payload(self) -> dict:
        return {
            "scenario": self.scenario,
            "trials": self.trials,
            "histogram": self.histogram,
            "agreement_rate": self.agreement_rate,
            "latency_ms": self.latency_ms,
            "backend_id": self.backend_id,
        }

    @classmethod
    def from_decisions(
        cls,
        scenario: str,
        records: list[DecisionRecord],
        backend_id: str = "",
    ) -> "ConsistencyReport":
        tokens = [r.decision.token.value for r in records]
        histogram: dict[str, int] = {}
        for t in tokens:
            histogram[t] = histogram.get(t, 0) + 1
        latency: dict[str, dict[str, float]] = {}
        for stage in STAGE_NAMES:
            vals = [r.latencies_ms.get(stage, 0.0) for r in records]
            latency[stage] = {
                "mean": sum(vals) / len(vals),
                "p95": percentile_nearest_rank(vals, 95.0),
            }
        return cls(
            scenario=scenario,
            trials=len(records),
            histogram=histogram,
            agreement_rate=agreement_rate(tokens),
            latency_ms=latency,
            backend_id=backend_id,
        )


class TrialFailure(Exception):
    """A trial could not produce a decision; the report is aborted."""


def _one_trial(
    scenario: Scenario,
    backend: BackendDescriptor | None,
    paced: bool,
    acceleration: float,
    **runner_kwargs,
) -> DecisionRecord:
    target = Mode.CLEANING if scenario.expected_cleaning is not None else Mode.OBSERVATION
    runner = ScenarioRunner(
        scenario, backend=backend, paced=paced, acceleration=acceleration, **runner_kwargs
    )
    try:
        record = runner.run_to_first_decision(target_mode=target)
    finally:
        runner.close()
    if record is None:
        raise TrialFailure(f"scenario {scenario.name!r} produced no {target.value} decision")
    return record


def run_trials(
    scenario: Scenario,
    n: int,
    backend: BackendDescriptor | None = None,
    paced: bool = False,
    acceleration: float = 20.0,
    parallel: int = 8,
    **runner_kwargs,
) -> ConsistencyReport:
    """Run n independent trials to the scenario's first relevant decision.

    Trials execute against independent worlds, optionally in parallel; the
    report is a pure fold over the per-trial decision records.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    backend = backend or BackendDescriptor(kind="mock")
    if parallel > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=min(parallel, n)) as pool:
            futures = [
                pool.submit(_one_trial, scenario, backend, paced, acceleration, **runner_kwargs)
                for _ in range(n)
            ]
            records = [f.result() for f in futures]
    else:
        records = [
            _one_trial(scenario, backend, paced, acceleration, **runner_kwargs) for _ in range(n)
        ]
    return ConsistencyReport.from_decisions(scenario.name, records, backend_id=backend.backend_id)
