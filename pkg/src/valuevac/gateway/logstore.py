"""Append-only event log. One JSON object per line, schema version tagged,
record ids strictly increasing. The same record shape backs in-memory run
logs and the gateway's persistent JSONL file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

LOG_SCHEMA_VERSION = 1

RECORD_KINDS = ("decision", "mode_change", "override", "event", "error")


class LogWriteError(Exception):
    """The persistent log could not be written; callers must degrade safely."""


@dataclass(frozen=True)
class LogRecord:
    id: int
    sim_time: float
    wall_clock: str
    kind: str
    payload: dict
    v: int = LOG_SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {
                "v": self.v,
                "id": self.id,
                "sim_time": self.sim_time,
                "wall_clock": self.wall_clock,
                "kind": self.kind,
                "payload": self.payload,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "LogRecord":
        raw = json.loads(line)
        return cls(
            id=int(raw["id"]),
            sim_time=float(raw["sim_time"]),
            wall_clock=str(raw["wall_clock"]),
            kind=str(raw["kind"]),
            payload=raw.get("payload", {}),
            v=int(raw.get("v", LOG_SCHEMA_VERSION)),
        )


class RecordLog:
    """In-memory log; the harness's default sink."""

    def __init__(self):
        self.records: list[LogRecord] = []

    @property
    def next_id(self) -> int:
        return self.records[-1].id + 1 if self.records else 1

    def append(self, kind: str, payload: dict, sim_time: float, wall_clock: str) -> LogRecord:
        if kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        record = LogRecord(
            id=self.next_id, sim_time=sim_time, wall_clock=wall_clock, kind=kind, payload=payload
        )
        self.records.append(record)
        return record

    def since(self, record_id: int) -> list[LogRecord]:
        return [r for r in self.records if r.id > record_id]

    def to_jsonl(self) -> str:
        return "\n".join(r.to_json() for r in self.records) + ("\n" if self.records else "")


class JsonlLogStore(RecordLog):
    """Write-through JSONL store. Each append is flushed before the id is
    returned; recovery continues ids from the last persisted record."""

    def __init__(self, path: str):
        super().__init__()
        self.path = path
        self._fh = None
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self.records.append(LogRecord.from_json(line))
        self._fh = open(path, "a", encoding="utf-8")

    def append(self, kind: str, payload: dict, sim_time: float, wall_clock: str) -> LogRecord:
        record = super().append(kind, payload, sim_time, wall_clock)
        try:
            self._fh.write(record.to_json() + "\n")
            self._fh.flush()
        except (OSError, ValueError) as exc:
            self.records.pop()
            raise LogWriteError(str(exc)) from exc
        return record

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_log(path: str) -> list[LogRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(LogRecord.from_json(line))
    return out
