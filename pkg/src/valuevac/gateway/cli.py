"""Command-line entry points: run a scenario closed-loop, serve the operator
API, evaluate decision consistency, and replay a log."""

from __future__ import annotations

import json
import os
import sys

import click

from ..controller import Mode
from ..harness.consistency import run_trials
from ..harness.replay import ReplayIntegrityError, replay_log
from ..harness.runner import ScenarioRunner
from ..harness.scenario import ScenarioError, data_path, load_scenario
from ..pipeline.backends import BackendDescriptor
from .config import ConfigError, load_config


def _resolve_scenario(ref: str) -> str:
    if os.path.exists(ref):
        return ref
    bundled = data_path(f"{ref}.yaml")
    if os.path.exists(bundled):
        return bundled
    raise click.UsageError(f"scenario not found: {ref!r} (no file and no bundled scenario)")


def _backend_from_flags(kind: str, endpoint: str | None, model: str, credential_env: str | None,
                        timeout: float, retries: int) -> BackendDescriptor:
    try:
        return BackendDescriptor(
            kind=kind,
            endpoint=endpoint,
            model=model,
            timeout_s=timeout,
            max_retries=retries,
            credential_env=credential_env,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))


backend_options = [
    click.option("--backend", "backend_kind", default="mock",
                 type=click.Choice(["mock", "stub", "remote"]), show_default=True),
    click.option("--endpoint", default=None, help="chat-completions URL (stub/remote)"),
    click.option("--model", default="gpt-4o", show_default=True),
    click.option("--credential-env", default=None, help="env var holding the bearer token"),
    click.option("--timeout", default=20.0, show_default=True, help="per-stage timeout, seconds"),
    click.option("--retries", default=2, show_default=True, help="per-stage retries"),
]


def _with_backend_options(fn):
    for opt in reversed(backend_options):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Value-aware vacuum robot: simulation, evaluation, and operator API."""


@main.command()
@click.option("--scenario", required=True, help="bundled scenario name or file path")
@_with_backend_options
@click.option("--until", default=None, type=float, help="sim seconds to run (default: scenario)")
@click.option("--paced/--fast", default=False, show_default=True,
              help="pace the loop at the clock acceleration instead of free-running")
@click.option("--acceleration", default=20.0, show_default=True)
@click.option("--log", "log_path", default=None, help="write the run log (JSONL) here")
def run(scenario, backend_kind, endpoint, model, credential_env, timeout, retries,
        until, paced, acceleration, log_path):
    """Run one closed-loop scenario and print its decisions."""
    try:
        scn = load_scenario(_resolve_scenario(scenario))
    except ScenarioError as exc:
        raise click.ClickException(str(exc))
    backend = _backend_from_flags(backend_kind, endpoint, model, credential_env, timeout, retries)
    runner = ScenarioRunner(scn, backend=backend, paced=paced, acceleration=acceleration)
    run_log = runner.run(until=until)
    if log_path:
        run_log.write(log_path)

    failures = []
    first_by_mode: dict[str, str] = {}
    for rec in run_log.decisions():
        token = rec.payload["decision"]["token"]
        mode = rec.payload.get("mode", "?")
        summary = rec.payload.get("summary", "")
        click.echo(f"[{rec.wall_clock} t={rec.sim_time:7.2f}s] {mode}: {token}"
                   + (f" - {summary}" if summary else ""))
        first_by_mode.setdefault(mode, token)
    if scn.expected is not None:
        got = first_by_mode.get(Mode.OBSERVATION.value)
        if got != scn.expected.value:
            failures.append(f"expected first observation decision {scn.expected.value}, got {got}")
    if scn.expected_cleaning is not None:
        got = first_by_mode.get(Mode.CLEANING.value)
        if got != scn.expected_cleaning.value:
            failures.append(
                f"expected first cleaning decision {scn.expected_cleaning.value}, got {got}"
            )
    for failure in failures:
        click.echo(f"EXPECTATION FAILED: {failure}", err=True)
    sys.exit(1 if failures else 0)


@main.command()
@click.option("--scenario", required=True)
@click.option("--trials", default=20, show_default=True)
@_with_backend_options
@click.option("--paced/--fast", default=False, show_default=True)
@click.option("--acceleration", default=20.0, show_default=True)
@click.option("--parallel", default=8, show_default=True)
@click.option("--json", "json_out", is_flag=True, help="also print the report as JSON")
def eval(scenario, trials, backend_kind, endpoint, model, credential_env, timeout, retries,
         paced, acceleration, parallel, json_out):
    """Repeat a scenario to its first decision and report consistency."""
    try:
        scn = load_scenario(_resolve_scenario(scenario))
    except ScenarioError as exc:
        raise click.ClickException(str(exc))
    backend = _backend_from_flags(backend_kind, endpoint, model, credential_env, timeout, retries)
    report = run_trials(scn, trials, backend=backend, paced=paced,
                        acceleration=acceleration, parallel=parallel)

    click.echo(f"scenario        {report.scenario}")
    click.echo(f"backend         {report.backend_id}")
    click.echo(f"trials          {report.trials}")
    click.echo(f"agreement_rate  {report.agreement_rate:.3f}")
    click.echo("decision        count")
    for token, count in sorted(report.histogram.items()):
        click.echo(f"  {token:<13} {count}")
    click.echo("stage           mean ms   p95 ms")
    for stage, stats in report.latency_ms.items():
        click.echo(f"  {stage:<13} {stats['mean']:8.2f} {stats['p95']:8.2f}")
    if json_out:
        click.echo(json.dumps(report.to_payload(), indent=2))

    expected = scn.expected_cleaning if scn.expected_cleaning is not None else scn.expected
    if expected is not None and set(report.histogram) != {expected.value}:
        click.echo(f"EXPECTATION FAILED: wanted all {expected.value}", err=True)
        sys.exit(1)
    sys.exit(0)


@main.command()
@click.option("--log", "log_path", required=True, help="run log (JSONL) to verify")
def replay(log_path):
    """Re-derive the mode timeline from a log and verify its integrity."""
    if not os.path.exists(log_path):
        raise click.ClickException(f"log file not found: {log_path}")
    try:
        timeline = replay_log(log_path)
    except ReplayIntegrityError as exc:
        raise click.ClickException(f"integrity error: {exc}")
    for entry in timeline:
        click.echo(f"t={entry['sim_time']:8.2f}s  record {entry['record_id']:>5}  {entry['mode']}")
    click.echo("log is self-consistent")
    sys.exit(0)


@main.command()
@click.option("--config", "config_path", required=True, help="gateway config file")
def serve(config_path):
    """Start the simulation loop and the operator HTTP/WS API."""
    from .service import serve as serve_gateway

    try:
        config = load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    try:
        serve_gateway(config)
    except OSError as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main()
