"""Gateway configuration: one structured file plus a credential env var.

Validation collects every violation before failing so a bad file is fixed in
one pass. Unknown keys warn instead of failing.
"""

from __future__ import annotations

import os
import re
import warnings
from dataclasses import dataclass, field

import yaml

from ..controller import CadenceConfig, SpeedConfig
from ..pipeline.backends import BACKEND_KINDS, BackendDescriptor
from ..pipeline.engine import PromptConfig

_LISTEN_RE = re.compile(r"^(?P<host>[A-Za-z0-9_.\-]+):(?P<port>\d{1,5})$")

KNOWN_KEYS = {
    "backend",
    "cadence",
    "speeds",
    "prompt",
    "floorplan",
    "scenario",
    "listen",
    "log_path",
    "clock_acceleration",
}


class ConfigError(Exception):
    def __init__(self, violations: list[str]):
        super().__init__("invalid config:\n" + "\n".join(f"  - {v}" for v in violations))
        self.violations = violations


@dataclass
class Config:
    backend: BackendDescriptor
    cadence: CadenceConfig
    speeds: SpeedConfig
    prompt: PromptConfig
    floorplan: str
    scenario: str | None
    listen_host: str = "127.0.0.1"
    listen_port: int = 8750
    log_path: str = "valuevac_log.jsonl"
    clock_acceleration: float = 20.0
    extra: dict = field(default_factory=dict)


def load_config(path: str) -> Config:
    if not os.path.exists(path):
        raise ConfigError([f"config file not found: {path}"])
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError([f"unparseable config: {exc}"])
    if not isinstance(raw, dict):
        raise ConfigError(["config top level must be a mapping"])

    for key in raw:
        if key not in KNOWN_KEYS:
            warnings.warn(f"config: unknown key {key!r} ignored", stacklevel=2)

    violations: list[str] = []
    base = os.path.dirname(os.path.abspath(path))

    def resolve(ref: str) -> str:
        if os.path.isabs(ref):
            return ref
        cand = os.path.join(base, ref)
        return cand if os.path.exists(cand) else ref

    backend_raw = raw.get("backend", {"kind": "mock"}) or {}
    backend = None
    kind = backend_raw.get("kind", "mock")
    if kind not in BACKEND_KINDS:
        violations.append(f"backend.kind: unknown kind {kind!r}")
    else:
        try:
            backend = BackendDescriptor(
                kind=kind,
                endpoint=backend_raw.get("endpoint"),
                model=backend_raw.get("model", "gpt-4o"),
                timeout_s=float(backend_raw.get("timeout_s", 20.0)),
                max_retries=int(backend_raw.get("max_retries", 2)),
                credential_env=backend_raw.get("credential_env"),
            )
        except (ValueError, TypeError) as exc:
            violations.append(f"backend: {exc}")
    if backend is not None and backend.kind == "remote":
        env = backend.credential_env or "VALUEVAC_API_KEY"
        if not os.environ.get(env):
            violations.append(
                f"backend: remote backend requires credential env var {env!r} to be set"
            )

    cadence = None
    try:
        cadence = CadenceConfig(**(raw.get("cadence") or {}))
    except (TypeError, ValueError) as exc:
        violations.append(f"cadence: {exc}")

    speeds = None
    try:
        speeds = SpeedConfig(**(raw.get("speeds") or {}))
    except (TypeError, ValueError) as exc:
        violations.append(f"speeds: {exc}")

    prompt_raw = raw.get("prompt") or {}
    prompt = PromptConfig(
        role=prompt_raw.get("role", PromptConfig().role),
        objective=prompt_raw.get("objective", PromptConfig().objective),
        mode_descriptions={
            **PromptConfig().mode_descriptions,
            **(prompt_raw.get("mode_descriptions") or {}),
        },
    )

    floorplan = raw.get("floorplan")
    if not floorplan:
        violations.append("floorplan: required")
        floorplan = ""
    else:
        floorplan = resolve(str(floorplan))
        if not os.path.exists(floorplan):
            violations.append(f"floorplan: file not found: {floorplan}")

    scenario = raw.get("scenario")
    if scenario is not None:
        scenario = resolve(str(scenario))
        if not os.path.exists(scenario):
            violations.append(f"scenario: file not found: {scenario}")

    listen = str(raw.get("listen", "127.0.0.1:8750"))
    host, port = "127.0.0.1", 8750
    match = _LISTEN_RE.match(listen)
    if not match:
        violations.append(f"listen: malformed address {listen!r}, expected host:port")
    else:
        host = match.group("host")
        port = int(match.group("port"))
        if not (0 < port < 65536):
            violations.append(f"listen: port {port} out of range")

    accel = raw.get("clock_acceleration", 20.0)
    try:
        accel = float(accel)
        if accel <= 0:
            violations.append("clock_acceleration: must be > 0")
    except (TypeError, ValueError):
        violations.append(f"clock_acceleration: not a number: {accel!r}")
        accel = 20.0

    if violations:
        raise ConfigError(violations)

    return Config(
        backend=backend,
        cadence=cadence,
        speeds=speeds,
        prompt=prompt,
        floorplan=floorplan,
        scenario=scenario,
        listen_host=host,
        listen_port=port,
        log_path=str(raw.get("log_path", "valuevac_log.jsonl")),
        clock_acceleration=accel,
    )
