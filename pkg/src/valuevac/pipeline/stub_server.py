"""Local fake model endpoint for wire-level tests.

Serves the chat-completions POST shape, records every request verbatim, and
answers from a scriptable responder. Behaviors (delays, errors, garbage) let
tests exercise timeout and fallback paths without a network.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .prompts import (
    EXTRACT_INSTRUCTION,
    FINALIZE_INSTRUCTION,
    REASONING_INSTRUCTION,
    SUMMARIZE_INSTRUCTION,
)


@dataclass
class Reply:
    text: str


@dataclass
class Hang:
    """Sleep longer than any client timeout; the caller gives up first."""

    seconds: float = 3600.0


@dataclass
class HttpFailure:
    status: int = 500


@dataclass(frozen=True)
class RecordedRequest:
    body: dict
    headers: dict[str, str]

    @property
    def system_text(self) -> str:
        for msg in self.body.get("messages", []):
            if msg.get("role") == "system":
                return _content_text(msg.get("content", ""))
        return ""

    @property
    def user_text(self) -> str:
        for msg in self.body.get("messages", []):
            if msg.get("role") == "user":
                return _content_text(msg.get("content", ""))
        return ""

    @property
    def stage(self) -> str:
        return classify_stage(self.user_text)

    @property
    def fingerprint(self) -> str:
        canonical = json.dumps(self.body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _content_text(content) -> str:
    if isinstance(content, str):
        return content
    if isinstance(content, list):
        return "\n".join(
            part.get("text", "") for part in content if isinstance(part, dict) and part.get("type") == "text"
        )
    return ""


_STAGE_MARKERS = (
    ("extract", EXTRACT_INSTRUCTION[:40]),
    ("reason", REASONING_INSTRUCTION[:40]),
    ("finalize", FINALIZE_INSTRUCTION[:40]),
    ("summarize", SUMMARIZE_INSTRUCTION[:40]),
)


def classify_stage(user_text: str) -> str:
    for stage, marker in _STAGE_MARKERS:
        if marker in user_text:
            return stage
    return "unknown"


DEFAULT_TRACE_TEXT = (
    "Value alignment: Nobody appears disturbed by cleaning right now.\n"
    "Time context: Mid-morning is a routine cleaning window.\n"
    "Action choice and consequences: Cleaning now tidies the room at no cost.\n"
    "Rationale: An empty room is the best time to vacuum.\n"
    "Purpose reflection: Cleaning when harmless is exactly the core purpose."
)


def default_responder(request: RecordedRequest):
    """Stage-keyed canned answers that drive a CLEAN/CONTINUE outcome."""
    stage = request.stage
    if stage == "extract":
        return Reply(json.dumps({"frames": [{"people": [], "pets": [], "clues": []}]}))
    if stage == "reason":
        return Reply(DEFAULT_TRACE_TEXT)
    if stage == "finalize":
        token = "CONTINUE" if "Current mode: cleaning" in request.user_text else "CLEAN"
        return Reply(f"The plan stands.\nDECISION: {token}")
    if stage == "summarize":
        return Reply("The room is free, so the robot went ahead and cleaned it.")
    return Reply("OK")


@dataclass
class StubModelServer:
    """In-process HTTP endpoint; use as a context manager in tests."""

    responder: object = None  # callable(RecordedRequest) -> Reply | Hang | HttpFailure | str
    host: str = "127.0.0.1"
    requests: list[RecordedRequest] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        if self.responder is None:
            self.responder = default_responder

    @property
    def port(self) -> int:
        assert self._server is not None, "server not started"
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}/v1/chat/completions"

    def start(self) -> "StubModelServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length)
                try:
                    body = json.loads(raw.decode("utf-8"))
                except json.JSONDecodeError:
                    self.send_error(400, "bad json")
                    return
                recorded = RecordedRequest(body=body, headers=dict(self.headers.items()))
                with outer._lock:
                    outer.requests.append(recorded)
                action = outer.responder(recorded)
                if isinstance(action, str):
                    action = Reply(action)
                if isinstance(action, Hang):
                    time.sleep(action.seconds)
                    return
                if isinstance(action, HttpFailure):
                    self.send_error(action.status, "scripted failure")
                    return
                assert isinstance(action, Reply)
                payload = json.dumps(
                    {"choices": [{"message": {"role": "assistant", "content": action.text}}]}
                ).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):  # silence per-request stderr noise
                pass

        self._server = ThreadingHTTPServer((self.host, 0), Handler)
        self._server.daemon_threads = True
        self._server.block_on_close = False  # scripted hangs must not stall teardown
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.02), daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def reset(self) -> None:
        with self._lock:
            self.requests.clear()

    def requests_for_stage(self, stage: str) -> list[RecordedRequest]:
        with self._lock:
            return [r for r in self.requests if r.stage == stage]

    def __enter__(self) -> "StubModelServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
