"""HTTP/WebSocket service for the operator console.

The simulation loop runs on its own thread and owns all mutable state; the
service reads immutable snapshots and talks to the loop through queued
commands. Slow websocket consumers are disconnected rather than ever
stalling a tick.
"""

from __future__ import annotations

import asyncio
import socket
import threading
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..controller import (
    Decision,
    DecisionSource,
    DecisionToken,
    Mode,
    TransitionError,
    transition,
)
from ..harness.runner import ScenarioRunner
from ..harness.scenario import Scenario, ScenarioError, _event_from_spec
from ..pipeline.engine import PromptConfig
from .config import Config
from .logstore import JsonlLogStore, LogWriteError, RecordLog

WS_QUEUE_LIMIT = 512
_DISCONNECT = {"type": "disconnect", "reason": "consumer too slow"}

DEGRADED_WAIT_S = 86400.0


@dataclass
class _Client:
    loop: asyncio.AbstractEventLoop
    queue: asyncio.Queue
    dead: bool = False


class BroadcastHub:
    """Fan-out from the sim thread to any number of websocket readers."""

    def __init__(self):
        self._clients: list[_Client] = []
        self._lock = threading.Lock()

    def register(self, loop: asyncio.AbstractEventLoop, queue: asyncio.Queue) -> _Client:
        client = _Client(loop=loop, queue=queue)
        with self._lock:
            self._clients.append(client)
        return client

    def unregister(self, client: _Client) -> None:
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)

    def publish(self, message: dict) -> None:
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            if client.dead:
                continue
            try:
                client.loop.call_soon_threadsafe(self._offer, client, message)
            except RuntimeError:
                client.dead = True

    def _offer(self, client: _Client, message: dict) -> None:
        if client.dead:
            return
        if client.queue.qsize() >= WS_QUEUE_LIMIT:
            client.dead = True
            client.queue.put_nowait(_DISCONNECT)
            return
        client.queue.put_nowait(message)


def _blank_scenario(config: Config) -> Scenario:
    return Scenario(name="live", floorplan_path=config.floorplan, until=float("inf"))


class GatewayRuntime:
    """Owns the runner thread, the persistent log, and the broadcast hub."""

    def __init__(self, config: Config, log: RecordLog | None = None, scenario: Scenario | None = None):
        from ..harness.scenario import load_scenario  # deferred: avoids cycle at import

        self.config = config
        if scenario is None:
            scenario = load_scenario(config.scenario) if config.scenario else _blank_scenario(config)
        self.scenario = scenario
        self.log = log if log is not None else JsonlLogStore(config.log_path)
        self.runner = ScenarioRunner(
            scenario,
            backend=config.backend,
            cadence=config.cadence,
            speeds=config.speeds,
            prompt_config=config.prompt or PromptConfig(),
            log=self.log,
            paced=True,
            acceleration=config.clock_acceleration,
        )
        self.hub = BroadcastHub()
        self.degraded = False
        self.last_summary = ""
        self.last_decision_payload: dict | None = None
        self._published_id = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        # pose pushes at >= 5 Hz real time
        self._pose_every = max(1, round(0.1 * config.clock_acceleration / self.runner.dt))

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._loop, name="valuevac-sim", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None
        self.runner.close()

    def _loop(self) -> None:
        ticks = 0
        while not self._stop.is_set():
            try:
                self.runner.tick_once()
            except LogWriteError:
                self._enter_degraded()
            self._publish_new_records()
            if ticks % self._pose_every == 0:
                self.hub.publish({"type": "pose", **self._pose_message()})
            ticks += 1

    def _enter_degraded(self) -> None:
        if self.degraded:
            return
        self.degraded = True
        # Persistence is part of the explainability contract: without it the
        # robot stops cleaning and waits for an operator.
        memory_log = RecordLog()
        memory_log.records = list(self.log.records)
        self.runner.log = memory_log
        controller = self.runner.controller
        controller.mode = Mode.OBSERVATION
        controller.eval_pending = False
        controller.wait_timer = DEGRADED_WAIT_S
        self.runner.world.set_drive(0.0, 0.0)
        self.runner._append("error", {"error": "log_write_failed", "degraded": True})
        self._publish_new_records()

    # -- publishing ----------------------------------------------------------

    def _record_dict(self, record) -> dict:
        return {
            "v": record.v,
            "id": record.id,
            "sim_time": record.sim_time,
            "wall_clock": record.wall_clock,
            "kind": record.kind,
            "payload": record.payload,
        }

    def _publish_new_records(self) -> None:
        records = self.runner.log.records
        while self._published_id < len(records):
            record = records[self._published_id]
            self._published_id += 1
            if record.kind == "decision":
                summary = record.payload.get("summary", "")
                if summary:
                    self.last_summary = summary
                self.last_decision_payload = record.payload
            self.hub.publish({"type": "log", "record": self._record_dict(record)})

    def _pose_message(self) -> dict:
        snap = self.runner.snapshot()
        return {
            "pose": snap["pose"],
            "mode": snap["mode"],
            "sim_time": snap["sim_time"],
            "wall_clock": snap["wall_clock"],
            "entities": snap["entities"],
        }

    # -- request-side API ------------------------------------------------------

    def state(self) -> dict:
        snap = self.runner.snapshot()
        snap["summary"] = self.last_summary
        snap["last_decision"] = self.last_decision_payload
        snap["degraded"] = self.degraded
        snap["backend"] = self.config.backend.backend_id
        snap["scenario"] = self.scenario.name
        plan = self.runner.world.plan
        snap["floorplan"] = {
            "walls": [[a[0], a[1], b[0], b[1]] for a, b in plan.walls],
            "dock": [plan.dock.x, plan.dock.y, plan.dock.heading],
            "bounds": list(plan.bounds),
        }
        snap["camera_fov_deg"] = self.runner.world.fov_deg
        return snap

    def records_since(self, since_id: int) -> list[dict]:
        return [self._record_dict(r) for r in self.runner.log.records if r.id > since_id]

    def submit_override(self, token_raw: str, operator: str) -> None:
        if self.degraded:
            raise HTTPException(status_code=503, detail="gateway degraded: log unavailable")
        try:
            token = DecisionToken(str(token_raw).upper())
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown decision token {token_raw!r}")
        mode = self.runner.controller.mode
        try:
            transition(mode, Decision(token, DecisionSource.OPERATOR_OVERRIDE))
        except TransitionError:
            raise HTTPException(
                status_code=409,
                detail=f"token {token.value} not valid in mode {mode.value}",
            )
        self.runner.submit_override(token, operator=operator)

    def inject_event(self, payload: dict) -> None:
        if self.degraded:
            raise HTTPException(status_code=503, detail="gateway degraded: log unavailable")
        spec = dict(payload)
        if "at" not in spec or spec["at"] is None:
            spec["at"] = self.runner.sim_time
        try:
            event = _event_from_spec(spec, "event")
        except ScenarioError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        self.runner.inject_event(event)


def create_app(runtime: GatewayRuntime) -> FastAPI:
    app = FastAPI(title="valuevac gateway", version="0.1.0")

    @app.get("/state")
    def get_state():
        return runtime.state()

    @app.get("/log")
    def get_log(since: int = 0):
        return {"records": runtime.records_since(since)}

    @app.post("/override")
    def post_override(body: dict = Body(...)):
        token = body.get("token")
        if token is None:
            raise HTTPException(status_code=422, detail="missing 'token'")
        runtime.submit_override(token, operator=str(body.get("operator", "operator")))
        return {"accepted": True, "token": str(token).upper()}

    @app.post("/scenario/event")
    def post_event(body: dict = Body(...)):
        runtime.inject_event(body)
        return {"accepted": True}

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue()
        client = runtime.hub.register(asyncio.get_running_loop(), queue)
        await ws.send_json({"type": "hello", "state": runtime.state()})
        try:
            while True:
                message = await queue.get()
                await ws.send_json(message)
                if message.get("type") == "disconnect":
                    await ws.close()
                    break
        except WebSocketDisconnect:
            pass
        finally:
            runtime.hub.unregister(client)

    return app


def check_port_free(host: str, port: int) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as exc:
            raise OSError(f"listen address {host}:{port} unavailable: {exc}") from exc


def serve(config: Config) -> None:
    """Blocking entry point: start the sim loop and serve the API."""
    import uvicorn

    check_port_free(config.listen_host, config.listen_port)
    runtime = GatewayRuntime(config)
    runtime.start()
    app = create_app(runtime)
    try:
        uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")
    finally:
        runtime.stop()
