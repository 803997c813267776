"""Declarative scenario files: parse, validate, build, run.

A scenario is one JSON document describing a complete reproducible run:
the deployment model, the physical node/link graph, and a time-ordered
event script. Parsing is strict — any malformed structure raises
:class:`ParseError` carrying the JSON line or the field path of the
offending value, so a typo in ``events[17].kind`` is reported as exactly
that rather than a stack trace from deep inside the run.

Schema (top-level keys)::

    {
      "id":          "two-utility-basic",        // required, non-empty
      "description": "...",                      // optional free text
      "seed":        42,                         // optional, default 0
      "duration_ms": 60000,                      // optional, default 60000
      "model":       { ... },                    // optional deployment model
      "nodes":       [{"id": "phx1",
                       "control_center": false,  // optional
                       "boot_at": 0}],           // optional; omit = boot at start
      "links":       [{"a": "phx1", "b": "phx2",
                       "latency_ms": 1, "bandwidth_kbps": 1000,
                       "loss_rate": 0.0, "kind": "mesh", "up": true}],
      "events":      [{"at": 100, "kind": "ConfigApply", ...payload}]
    }

Event payloads are the event object minus ``at`` and ``kind``; the kinds
and their required fields are listed in :data:`EVENT_FIELDS`.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import deployment
from .engine import EVENT_KINDS, ScenarioEvent
from .network import Network

log = logging.getLogger("phoenixsen.scenario")

DEFAULT_DURATION_MS = 60_000

LINK_KINDS = ("mesh", "control", "broadcast")

#: Required payload fields per event kind (beyond ``at`` and ``kind``).
EVENT_FIELDS: dict[str, tuple[str, ...]] = {
    "NodeJoin": ("node",),
    "NodeLeave": ("node",),
    "LinkUp": ("a", "b"),
    "LinkDown": ("a", "b"),
    "DeviceAttach": ("node", "device", "address"),
    "DeviceSend": ("node", "device", "dst"),
    "DeviceCompromise": ("node", "device"),
    "RegisterClient": ("node", "number"),
    "PlaceCall": ("node", "number"),
    "SendMessage": ("node", "from", "to"),
    "RoamClient": ("from", "to", "number"),
    "ShieldPair": ("node", "shield", "device"),
    "ShieldActivate": ("node", "shield"),
    "QuarantineDevice": ("node", "device"),
    "ConfigApply": ("node", "utility", "substation"),
    "AgentPartition": ("node",),
}


class ParseError(Exception):
    """Scenario document rejected; pinpoints the line or field at fault."""

    def __init__(self, message: str, *, path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where = f" at {path}"
        elif line is not None:
            where = f" at line {line}" + (
                f" column {column}" if column is not None else "")
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class NodeSpec:
    """One node row from a scenario document."""

    node_id: str
    control_center: bool = False
    boot_at: Optional[int] = None  # None: boots with the network at t=0


@dataclass(frozen=True)
class LinkRow:
    """One link row from a scenario document."""

    a: str
    b: str
    latency_ms: int = 1
    bandwidth_kbps: int = 1000
    loss_rate: float = 0.0
    kind: str = "mesh"
    up: bool = True


@dataclass(frozen=True)
class Scenario:
    """A fully validated scenario, ready to build and run."""

    scenario_id: str
    seed: int
    duration_ms: int
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkRow, ...]
    events: tuple[ScenarioEvent, ...]
    model: Optional[deployment.DeploymentModel] = None
    description: str = ""
    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        body: dict[str, Any] = {
            "id": self.scenario_id,
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "nodes": [
                {"id": n.node_id,
                 **({"control_center": True} if n.control_center else {}),
                 **({"boot_at": n.boot_at} if n.boot_at is not None else {})}
                for n in self.nodes],
            "links": [
                {"a": l.a, "b": l.b, "latency_ms": l.latency_ms,
                 "bandwidth_kbps": l.bandwidth_kbps,
                 "loss_rate": l.loss_rate, "kind": l.kind, "up": l.up}
                for l in self.links],
            "events": [{"at": e.at, "kind": e.kind, **e.payload}
                       for e in self.events],
        }
        if self.description:
            body["description"] = self.description
        if self.model is not None:
            body["model"] = self.model.to_dict()
        if self.groups:
            body["groups"] = {k: list(v) for k, v in sorted(self.groups.items())}
        return body

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


# -- field helpers ------------------------------------------------------------------


def _require(data: dict, key: str, path: str) -> Any:
    if key not in data:
        raise ParseError(f"missing required field {key!r}", path=path)
    return data[key]


def _as_str(value: Any, path: str, *, nonempty: bool = True) -> str:
    if not isinstance(value, str):
        raise ParseError(f"expected string, got {type(value).__name__}",
                         path=path)
    if nonempty and not value:
        raise ParseError("must not be empty", path=path)
    return value


def _as_int(value: Any, path: str, *, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected integer, got {type(value).__name__}",
                         path=path)
    if minimum is not None and value < minimum:
        raise ParseError(f"must be >= {minimum}, got {value}", path=path)
    return value


def _as_number(value: Any, path: str, *, lo: float, hi: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected number, got {type(value).__name__}",
                         path=path)
    if not lo <= value <= hi:
        raise ParseError(f"must be within [{lo}, {hi}], got {value}", path=path)
    return float(value)


def _as_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ParseError(f"expected boolean, got {type(value).__name__}",
                         path=path)
    return value


def _as_dict(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ParseError(f"expected object, got {type(value).__name__}",
                         path=path)
    return value


def _as_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ParseError(f"expected array, got {type(value).__name__}",
                         path=path)
    return value


# -- parsing ------------------------------------------------------------------


def parse_scenario(text: str, *, source: str = "<scenario>") -> Scenario:
    """Parse and validate one scenario document from JSON text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: invalid JSON: {exc.msg}",
                         line=exc.lineno, column=exc.colno) from exc
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be an object", path="$")

    known = {"id", "description", "seed", "duration_ms", "model",
             "nodes", "links", "events", "groups"}
    for key in data:
        if key not in known:
            raise ParseError(f"unknown field {key!r}", path=f"$.{key}")

    scenario_id = _as_str(_require(data, "id", "$.id"), "$.id")
    description = _as_str(data.get("description", ""), "$.description",
                          nonempty=False)
    seed = _as_int(data.get("seed", 0), "$.seed", minimum=0)
    duration = _as_int(data.get("duration_ms", DEFAULT_DURATION_MS),
                       "$.duration_ms", minimum=1)

    model = None
    if "model" in data:
        model_dict = _as_dict(data["model"], "$.model")
        model = deployment.DeploymentModel.from_dict(model_dict)
        problems = deployment.validate(model)
        if problems:
            field_name, msg = problems[0]
            raise ParseError(msg, path=f"$.model.{field_name}")

    nodes = _parse_nodes(_as_list(_require(data, "nodes", "$.nodes"),
                                  "$.nodes"))
    node_ids = {n.node_id for n in nodes}
    links = _parse_links(_as_list(data.get("links", []), "$.links"), node_ids)
    events = _parse_events(_as_list(data.get("events", []), "$.events"),
                           node_ids, duration)
    groups = _parse_groups(data.get("groups", {}))
    return Scenario(scenario_id, seed, duration, nodes, links, events,
                    model, description, groups)


def _parse_nodes(rows: list) -> tuple[NodeSpec, ...]:
    if not rows:
        raise ParseError("at least one node required", path="$.nodes")
    out: list[NodeSpec] = []
    seen: set[str] = set()
    for i, row in enumerate(rows):
        path = f"$.nodes[{i}]"
        obj = _as_dict(row, path)
        node_id = _as_str(_require(obj, "id", f"{path}.id"), f"{path}.id")
        if node_id in seen:
            raise ParseError(f"duplicate node id {node_id!r}",
                             path=f"{path}.id")
        seen.add(node_id)
        cc = _as_bool(obj.get("control_center", False),
                      f"{path}.control_center")
        boot_at = None
        if "boot_at" in obj:
            boot_at = _as_int(obj["boot_at"], f"{path}.boot_at", minimum=0)
        extra = set(obj) - {"id", "control_center", "boot_at"}
        if extra:
            raise ParseError(f"unknown field {sorted(extra)[0]!r}", path=path)
        out.append(NodeSpec(node_id, cc, boot_at))
    return tuple(out)


def _parse_links(rows: list, node_ids: set[str]) -> tuple[LinkRow, ...]:
    out: list[LinkRow] = []
    for i, row in enumerate(rows):
        path = f"$.links[{i}]"
        obj = _as_dict(row, path)
        a = _as_str(_require(obj, "a", f"{path}.a"), f"{path}.a")
        b = _as_str(_require(obj, "b", f"{path}.b"), f"{path}.b")
        for end, name in ((a, "a"), (b, "b")):
            if end not in node_ids:
                raise ParseError(f"unknown node {end!r}", path=f"{path}.{name}")
        if a == b:
            raise ParseError("link endpoints must differ", path=path)
        kind = _as_str(obj.get("kind", "mesh"), f"{path}.kind")
        if kind not in LINK_KINDS:
            raise ParseError(
                f"unknown link kind {kind!r} (one of {', '.join(LINK_KINDS)})",
                path=f"{path}.kind")
        out.append(LinkRow(
            a, b,
            _as_int(obj.get("latency_ms", 1), f"{path}.latency_ms", minimum=0),
            _as_int(obj.get("bandwidth_kbps", 1000),
                    f"{path}.bandwidth_kbps", minimum=1),
            _as_number(obj.get("loss_rate", 0.0), f"{path}.loss_rate",
                       lo=0.0, hi=1.0),
            kind,
            _as_bool(obj.get("up", True), f"{path}.up")))
        extra = set(obj) - {"a", "b", "latency_ms", "bandwidth_kbps",
                            "loss_rate", "kind", "up"}
        if extra:
            raise ParseError(f"unknown field {sorted(extra)[0]!r}", path=path)
    return tuple(out)


def _parse_events(rows: list, node_ids: set[str],
                  duration: int) -> tuple[ScenarioEvent, ...]:
    out: list[ScenarioEvent] = []
    for i, row in enumerate(rows):
        path = f"$.events[{i}]"
        obj = _as_dict(row, path)
        at = _as_int(_require(obj, "at", f"{path}.at"), f"{path}.at",
                     minimum=0)
        if at > duration:
            raise ParseError(f"event time {at} is after the run ends "
                             f"({duration})", path=f"{path}.at")
        kind = _as_str(_require(obj, "kind", f"{path}.kind"), f"{path}.kind")
        if kind not in EVENT_KINDS:
            raise ParseError(
                f"unknown event kind {kind!r}", path=f"{path}.kind")
        payload = {k: v for k, v in obj.items() if k not in ("at", "kind")}
        for req in EVENT_FIELDS[kind]:
            if req not in payload:
                raise ParseError(
                    f"{kind} requires field {req!r}", path=f"{path}.{req}")
        for ref in ("node", "a", "b", "from", "to"):
            value = payload.get(ref)
            if kind in ("SendMessage",) and ref in ("from", "to"):
                continue  # message endpoints are numbers, not node ids
            if value is not None and isinstance(value, str) \
                    and value not in node_ids:
                raise ParseError(f"unknown node {value!r}",
                                 path=f"{path}.{ref}")
        out.append(ScenarioEvent(at, kind, payload))
    return tuple(out)


def _parse_groups(raw: Any) -> dict[str, tuple[str, ...]]:
    obj = _as_dict(raw, "$.groups") if raw else {}
    groups: dict[str, tuple[str, ...]] = {}
    for name, members in obj.items():
        lst = _as_list(members, f"$.groups.{name}")
        groups[name] = tuple(
            _as_str(m, f"$.groups.{name}[{j}]") for j, m in enumerate(lst))
    return groups


def load_scenario(path: str | Path) -> Scenario:
    """Read and parse a scenario file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario {p}: {exc.strerror}") from exc
    return parse_scenario(text, source=str(p))


# -- building and running ------------------------------------------------------------------


def build_network(scenario: Scenario, *,
                  model: Optional[deployment.DeploymentModel] = None,
                  seed: Optional[int] = None) -> Network:
    """Materialize the scenario: nodes, links, model, scheduled events.

    ``model`` overrides the scenario's embedded model; ``seed`` overrides
    its seed. Nodes without ``boot_at`` come up before the clock starts;
    the rest join via scheduled NodeJoin events. Returns the network ready
    for :meth:`Network.run_until` — nothing has executed yet.
    """
    net = Network(seed=scenario.seed if seed is None else seed)
    chosen = model if model is not None else scenario.model
    if chosen is not None:
        net.use_model(chosen)
    for spec in scenario.nodes:
        net.add_node(spec.node_id, control_center=spec.control_center)
    for row in scenario.links:
        net.add_link(row.a, row.b, row.latency_ms, row.bandwidth_kbps,
                     row.loss_rate, row.kind, row.up)
    for spec in scenario.nodes:
        if spec.boot_at is None:
            net.nodes[spec.node_id].boot()
        else:
            net.schedule(ScenarioEvent(spec.boot_at, "NodeJoin",
                                       {"node": spec.node_id}))
    for event in scenario.events:
        net.schedule(event)
    return net


def run(scenario: Scenario, *,
        model: Optional[deployment.DeploymentModel] = None,
        seed: Optional[int] = None,
        until: Optional[int] = None) -> Network:
    """Build and run the scenario to its duration (or ``until``)."""
    net = build_network(scenario, model=model, seed=seed)
    net.run_until(scenario.duration_ms if until is None else until)
    return net
