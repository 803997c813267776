"""HTTP/WebSocket access to a run: live paced replay or post-hoc inspection.

Two session flavors sit behind one FastAPI app:

* :class:`LiveSession` — a worker thread advances simulation time at a
  wall-clock pace (default 1:1). Operator actions arrive over POST,
  enter a queue, and are scheduled as ordinary scripted events at the
  current simulation time — the same funnel scripted scenarios use, so
  a live run stays deterministic given the same action timeline. The
  session lock around sim steps and read access is the single
  cross-thread boundary; everything handed to HTTP handlers is plain
  JSON-serializable data.
* :class:`InspectSession` — wraps a completed run; every endpoint
  answers from the frozen log and final state, and time-indexed
  queries (``/snapshot?at=``) fold monitoring state as of any moment.

Endpoints: ``GET /`` (run info), ``GET /snapshot?at=``, ``GET /alerts``,
``GET /devices/{node}``, ``GET /topology``, ``POST /actions``, and
``WS /ws`` pushing samples, alerts, and notable events as JSON.
"""
from __future__ import annotations

import asyncio
import logging
import socket
import threading
import time as wall
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .engine import ScenarioEvent
from .harness import RunResult
from .netmon import fold_state

log = logging.getLogger("phoenixsen.api")

#: Log record kinds forwarded to WebSocket subscribers as "event" pushes.
EVENT_PUSH_KINDS = frozenset({
    "phase_changed", "link_state", "config_applied", "config_rejected",
    "call_attempt", "msg_receipt", "roam_completed", "roam_rejected",
    "shield_activated", "shield_reject", "shield_drop", "shield_diverted",
    "voip_reject", "msg_reject", "unknown_vni", "node_state",
    "device_quarantined", "scenario_event",
})

#: Operator actions accepted over POST /actions → scripted event kinds.
ACTION_KINDS = {
    "ApplyConfig": ("ConfigApply", ("node", "utility", "substation")),
    "ShieldActivate": ("ShieldActivate", ("node", "shield")),
    "QuarantineDevice": ("QuarantineDevice", ("node", "device")),
}


class BindFailure(Exception):
    """The requested listen address is unavailable."""


class ReadOnlySessionError(Exception):
    """Actions are not accepted against a completed (inspect) run."""


def _topology(net) -> dict:
    nodes = []
    for node_id in sorted(net.nodes):
        node = net.nodes[node_id]
        status = node.node_status()
        nodes.append({
            "id": node_id,
            "up": node.up,
            "control_center": node.is_control_center,
            "phase": status["phase"],
            "configured": status["configured"],
            "utility": status["utility"],
            "substation": status["substation"],
        })
    links = [{
        "a": link.a, "b": link.b, "up": link.up, "kind": link.kind,
        "latency_ms": link.latency_ms, "bandwidth_kbps": link.bandwidth_kbps,
        "slow": link.slow,
    } for link in net.links]
    return {"nodes": nodes, "links": links}


def _device_inventory(net, node_id: str) -> Optional[dict]:
    node = net.nodes.get(node_id)
    if node is None:
        return None
    devices = []
    for env in node.environments:
        for dev in env.attached.values():
            shield = node._device_shield.get(dev.device_id)
            entry = {
                "device": dev.device_id,
                "address": dev.address,
                "hostname": dev.hostname,
                "services": sorted(dev.services),
                "compromised": dev.compromised,
                "quarantined": dev.quarantined,
                "vni": env.vni,
                "utility": env.utility,
                "vlan_type": env.vlan_type,
            }
            if shield is not None:
                dev_shield = node.shields[shield]
                entry["shield"] = {
                    "id": shield,
                    "mode": dev_shield.mode,
                    "policy": dev_shield.policy,
                }
            devices.append(entry)
    devices.sort(key=lambda d: d["device"])
    return {"node": node_id, "up": node.up, "devices": devices}


def _find_backend(net):
    for node_id in sorted(net.nodes):
        backend = net.nodes[node_id].backend
        if backend is not None and backend.samples:
            return backend
    for node_id in sorted(net.nodes):
        backend = net.nodes[node_id].backend
        if backend is not None:
            return backend
    return None


class InspectSession:
    """Read-only view over a finished run; all answers come from the log."""

    mode = "inspect"

    def __init__(self, result: RunResult):
        self.result = result
        self.net = result.network
        self.pushes: list[dict] = []
        self.finished = True

    def now(self) -> int:
        return self.net.sim.clock.now

    def info(self) -> dict:
        return {
            "scenario": self.result.scenario.scenario_id,
            "mode": self.mode,
            "seed": self.result.report.seed,
            "now": self.now(),
            "duration_ms": self.result.report.duration_ms,
            "finished": True,
            "passed": self.result.report.passed,
        }

    def snapshot(self, at: Optional[int] = None) -> dict:
        t = self.now() if at is None else at
        backend = _find_backend(self.net)
        samples = [] if backend is None else [
            s for s in backend.samples if s.at <= t]
        return {"at": t, "state": fold_state(samples)}

    def alerts(self, since: int = 0, until: Optional[int] = None) -> list[dict]:
        backend = _find_backend(self.net)
        if backend is None:
            return []
        return backend.alerts(since, until)

    def devices(self, node_id: str) -> Optional[dict]:
        return _device_inventory(self.net, node_id)

    def topology(self) -> dict:
        return _topology(self.net)

    def act(self, kind: str, params: dict) -> dict:
        raise ReadOnlySessionError(
            "this run already completed; actions need a live session")

    def stop(self) -> None:  # interface symmetry with LiveSession
        pass


class LiveSession:
    """Paced replay with an action queue; one lock guards the simulation."""

    mode = "live"

    def __init__(self, scenario, *, model=None, seed: Optional[int] = None,
                 rate: float = 1.0):
        from .scenario import build_network  # local import avoids a cycle
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.rate = rate
        self.lock = threading.RLock()
        self.net = build_network(scenario, model=model, seed=self.seed)
        self.pushes: list[dict] = []
        self.finished = False
        self._actions: list[ScenarioEvent] = []
        self._stop = threading.Event()
        self._log_cursor = 0
        self._sample_cursor = 0
        self._last_tick = -1
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name="phoenixsen-live")

    def start(self) -> "LiveSession":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5)

    def _run(self) -> None:
        t0 = wall.monotonic()
        horizon = self.scenario.duration_ms
        while not self._stop.is_set():
            target = int((wall.monotonic() - t0) * 1000 * self.rate)
            target = min(target, horizon)
            with self.lock:
                now = self.net.sim.clock.now
                for event in self._actions:
                    # Rebase: sim time may have passed the queue timestamp.
                    at = max(event.at, now)
                    self.net.schedule(ScenarioEvent(at, event.kind,
                                                    event.payload))
                self._actions.clear()
                self.net.run_until(max(target, now))
                self._collect_pushes()
                if target >= horizon:
                    self.finished = True
            # Once the paced replay is over, idle but stay up for
            # actions and reads until stopped.
            self._stop.wait(0.1 if self.finished else 0.02)

    def _collect_pushes(self) -> None:
        records = self.net.sim.log.records
        now = self.net.sim.clock.now
        for rec in records[self._log_cursor:]:
            if rec["kind"] == "alert":
                self.pushes.append({"type": "alert", "alert": rec})
            elif rec["kind"] in EVENT_PUSH_KINDS:
                self.pushes.append({"type": "event", "event": rec})
        self._log_cursor = len(records)
        backend = _find_backend(self.net)
        if backend is not None:
            for sample in backend.samples[self._sample_cursor:]:
                self.pushes.append({"type": "sample",
                                    "sample": sample.to_dict()})
            self._sample_cursor = len(backend.samples)
        tick = now // 1000
        if tick != self._last_tick:
            self._last_tick = tick
            self.pushes.append({"type": "tick", "now": now,
                                "finished": self.finished})

    def now(self) -> int:
        with self.lock:
            return self.net.sim.clock.now

    def info(self) -> dict:
        with self.lock:
            return {
                "scenario": self.scenario.scenario_id,
                "mode": self.mode,
                "seed": self.seed,
                "now": self.net.sim.clock.now,
                "duration_ms": self.scenario.duration_ms,
                "finished": self.finished,
                "rate": self.rate,
            }

    def snapshot(self, at: Optional[int] = None) -> dict:
        with self.lock:
            t = self.net.sim.clock.now if at is None else at
            backend = _find_backend(self.net)
            samples = [] if backend is None else [
                s for s in backend.samples if s.at <= t]
            return {"at": t, "state": fold_state(samples)}

    def alerts(self, since: int = 0, until: Optional[int] = None) -> list[dict]:
        with self.lock:
            backend = _find_backend(self.net)
            if backend is None:
                return []
            return backend.alerts(since, until)

    def devices(self, node_id: str) -> Optional[dict]:
        with self.lock:
            return _device_inventory(self.net, node_id)

    def topology(self) -> dict:
        with self.lock:
            return _topology(self.net)

    def act(self, kind: str, params: dict) -> dict:
        """Queue one operator action; it executes at current sim time."""
        mapped = ACTION_KINDS.get(kind)
        if mapped is None:
            raise ValueError(f"unknown action kind {kind!r}")
        event_kind, required = mapped
        for field_name in required:
            if field_name not in params:
                raise ValueError(f"{kind} requires {field_name!r}")
        with self.lock:
            at = self.net.sim.clock.now
            event = ScenarioEvent(at, event_kind, dict(params))
            self._actions.append(event)
            return {"accepted": True, "kind": kind, "at": at}


def create_app(session) -> FastAPI:
    """Build the FastAPI app over a live or inspect session."""
    app = FastAPI(title="phoenixsen", docs_url=None, redoc_url=None)
    app.state.session = session
    # The console is typically served by a separate static file server, so
    # browser requests arrive cross-origin. This is an unauthenticated desk
    # tool bound to localhost by default; allow any origin.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/")
    def root() -> dict:
        return session.info()

    @app.get("/snapshot")
    def snapshot(at: Optional[int] = Query(default=None, ge=0)) -> dict:
        return session.snapshot(at)

    @app.get("/alerts")
    def alerts(since: int = Query(default=0, ge=0),
               until: Optional[int] = Query(default=None, ge=0)) -> list:
        return session.alerts(since, until)

    @app.get("/devices/{node_id}")
    def devices(node_id: str) -> dict:
        found = session.devices(node_id)
        if found is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown node {node_id!r}")
        return found

    @app.get("/topology")
    def topology() -> dict:
        return session.topology()

    @app.post("/actions")
    def actions(body: dict) -> JSONResponse:
        kind = body.get("kind")
        if not isinstance(kind, str):
            raise HTTPException(status_code=400, detail="missing action kind")
        params = {k: v for k, v in body.items() if k != "kind"}
        try:
            outcome = session.act(kind, params)
        except ReadOnlySessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return JSONResponse(outcome)

    @app.websocket("/ws")
    async def ws(sock: WebSocket) -> None:
        await sock.accept()
        cursor = len(session.pushes)
        await sock.send_json({
            "type": "hello",
            **session.info(),
            "cursor": cursor,
        })
        try:
            while True:
                pending = session.pushes[cursor:]
                for push in pending:
                    await sock.send_json(push)
                cursor += len(pending)
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return

    return app


def serve(session, bind: str = "127.0.0.1:8470") -> None:
    """Serve the session until interrupted; raises BindFailure up front."""
    import uvicorn

    host, _, port_text = bind.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_text)
    except ValueError:
        raise BindFailure(f"invalid bind address {bind!r}") from None
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {bind}: {exc.strerror}") from exc
    finally:
        probe.close()
    app = create_app(session)
    uvicorn.run(app, host=host, port=port, log_level="warning")
