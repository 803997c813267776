"""Distributed monitoring: per-node agents, cache-and-forward, state fold.

Agents sample link health and scan attached devices on a fixed cadence,
then stream samples to a central backend discovered through DNS service
discovery (`_netmon._tcp`). While the backend is unreachable the agent
caches samples in arrival order and drains the backlog fully before going
live again, so the backend's view is eventually complete and ordered per
agent even across partitions.

`query_state` is a pure fold over the sample log: the state at time T is
fully determined by the multiset of samples with at <= T, independent of
arrival interleaving.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from . import frames as fr
from .dnssd import ZONE, ResourceRecord
from .routing import NoRouteError

log = logging.getLogger("phoenixsen.netmon")

SCAN_INTERVAL_MS = 10_000
CACHE_LIMIT = 10_000
PROBE_PORTS = (22, 80, 443, 502, 20_000)
ALERT_DEDUP_MS = 60_000

SEVERITY_INFO = "info"
SEVERITY_WARNING = "warning"
SEVERITY_CRITICAL = "critical"

_IDS_SEVERITY = {
    "device_compromised": SEVERITY_CRITICAL,
    "unknown_vni": SEVERITY_WARNING,
    "foreign_source": SEVERITY_WARNING,
    "number_conflict": SEVERITY_WARNING,
    "cache_overflow": SEVERITY_WARNING,
    "device_quarantined": SEVERITY_WARNING,
    "shield_drop": SEVERITY_WARNING,
}

SERVICE_LABEL = "_netmon._tcp"


def backend_host(node_id: str) -> str:
    return f"mon-{node_id}.{ZONE}".lower()


def node_from_backend_host(target: str) -> Optional[str]:
    target = target.rstrip(".").lower()
    if target.startswith("mon-") and target.endswith("." + ZONE):
        return target[len("mon-"):-len("." + ZONE)]
    return None


@dataclass(frozen=True)
class Sample:
    """One agent observation; the unit of transport and of the state fold."""
    agent: str
    seq: int
    at: int
    kind: str          # link_stats | device_seen | device_lost | ids_event
    data: dict

    def key(self) -> tuple:
        return (self.agent, self.at, self.seq)

    def to_dict(self) -> dict:
        return {"agent": self.agent, "seq": self.seq, "at": self.at,
                "kind": self.kind, "data": self.data}


def sample_from_dict(d: dict) -> Sample:
    return Sample(d["agent"], d["seq"], d["at"], d["kind"], d["data"])


class MonitorAgent:
    """Per-node sampler with cache-and-forward toward the backend.

    ``host`` facade: node_id, now(), call_at(), dns, send_unicast(),
    log_event(), link_snapshot() -> list of dicts, device_snapshot() ->
    list of dicts, node_status() -> dict, backend_here() -> MonitorBackend
    or None, backend_reachable(node) -> bool.
    """

    def __init__(self, host) -> None:
        self.host = host
        self.backend_node: Optional[str] = None
        self.cache: list[Sample] = []
        self.seq = 0
        self.seen_devices: set[str] = set()
        self.partitioned_until = 0
        self._overflowing = False
        self._timer = None
        self.running = False

    def start(self) -> None:
        self.running = True
        self._discover()
        self._tick()

    def stop(self) -> None:
        self.running = False
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    # -- sampling -------------------------------------------------------------

    def _tick(self) -> None:
        if not self.running:
            return
        self.scan_once()
        self._timer = self.host.call_at(
            self.host.now() + SCAN_INTERVAL_MS, self._tick)

    def scan_once(self) -> None:
        status = dict(self.host.node_status())
        status["links"] = self.host.link_snapshot()
        self._emit("link_stats", status)
        present = set()
        for dev in self.host.device_snapshot():
            present.add(dev["address"])
            probe = dict(dev)
            probe["open_ports"] = sorted(set(dev.get("services", ()))
                                         & set(PROBE_PORTS))
            probe.pop("services", None)
            self._emit("device_seen", probe)
        for gone in sorted(self.seen_devices - present):
            self._emit("device_lost", {"address": gone})
        self.seen_devices = present

    def ingest_ids_event(self, subtype: str, subject: str, **extra) -> None:
        """Security-relevant observations fed by other services."""
        severity = _IDS_SEVERITY.get(subtype, SEVERITY_WARNING)
        data = {"subtype": subtype, "subject": subject,
                "severity": severity, **extra}
        self._emit("ids_event", data)

    def _emit(self, kind: str, data: dict) -> None:
        self.seq += 1
        sample = Sample(self.host.node_id, self.seq, self.host.now(),
                        kind, data)
        self._forward(sample)

    # -- transport ------------------------------------------------------------

    def partition(self, duration_ms: int) -> None:
        """Deliberately stop streaming (fault injection for store-and-forward)."""
        self.partitioned_until = self.host.now() + duration_ms
        self.host.log_event("agent_partition", until=self.partitioned_until)

    def on_connectivity_change(self) -> None:
        """Routing changed: try to flush any backlog right away."""
        if self.running and self.cache:
            self._drain()

    def _discover(self) -> None:
        def on_found(instances: list[tuple[str, int, int]]) -> None:
            if self.backend_node is not None:
                return
            for target, _port, _priority in instances:
                node = node_from_backend_host(target)
                if node is not None:
                    self.backend_node = node
                    self.host.log_event("netmon_backend", backend=node)
                    self._drain()
                    return
        self.host.dns.discover_service(SERVICE_LABEL, on_found)

    def _reachable(self) -> bool:
        if self.host.now() < self.partitioned_until:
            return False
        if self.backend_node is None:
            self._discover()
            if self.backend_node is None:
                return False
        if self.backend_node == self.host.node_id:
            return True
        return self.host.backend_reachable(self.backend_node)

    def _forward(self, sample: Sample) -> None:
        if self._reachable():
            self._drain()
            if not self.cache:
                self._send(sample)
                return
            # Backlog not yet flushed (shouldn't happen: drain is synchronous)
        self._enqueue(sample)

    def _enqueue(self, sample: Sample) -> None:
        if len(self.cache) >= CACHE_LIMIT:
            self.cache.pop(0)
            self.cache.append(sample)
            # Raised after the append so the overflow event's sequence
            # number stays in emission order within the cache.
            if not self._overflowing:
                self._overflowing = True
                self.ingest_ids_event("cache_overflow", self.host.node_id,
                                      dropped_oldest=True)
            return
        self.cache.append(sample)

    def _drain(self) -> None:
        # _reachable() may kick off backend discovery, whose resolve
        # callback drains reentrantly; check the cache *after* it so the
        # pop can never hit a list a nested drain already emptied.
        while self._reachable() and self.cache:
            self._send(self.cache.pop(0))
        if not self.cache:
            self._overflowing = False

    def _send(self, sample: Sample) -> None:
        local = self.host.backend_here()
        if self.backend_node == self.host.node_id and local is not None:
            local.ingest(sample)
            return
        body = fr.canonical_json(sample.to_dict())
        try:
            self.host.send_unicast(self.backend_node, fr.UK_NETMON, body)
        except NoRouteError:
            self._enqueue(sample)


class MonitorBackend:
    """Central sample store plus the time-indexed state fold."""

    def __init__(self, host) -> None:
        self.host = host
        self.samples: list[Sample] = []
        self._seen: set[tuple] = set()
        self._listeners: list[Callable[[dict], None]] = []

    def start(self) -> None:
        node = self.host.node_id
        self.host.dns.register(ResourceRecord(backend_host(node), "A", 3600,
                                              self.host.management_address(),
                                              node))
        inst = f"{node}.{SERVICE_LABEL}.{ZONE}"
        self.host.dns.register(ResourceRecord(f"{SERVICE_LABEL}.{ZONE}", "PTR",
                                              3600, inst, node))
        self.host.dns.register(ResourceRecord(inst, "SRV", 3600,
                                              f"0 0 9100 {backend_host(node)}",
                                              node))

    def subscribe(self, listener: Callable[[dict], None]) -> None:
        self._listeners.append(listener)

    def ingest(self, sample: Sample) -> None:
        if sample.key() in self._seen:
            return
        self._seen.add(sample.key())
        self.samples.append(sample)
        if sample.kind == "ids_event":
            alert = {"at": sample.at, "agent": sample.agent,
                     **sample.data}
            self.host.log_event("alert", **alert)
            for listener in list(self._listeners):
                listener(alert)

    def on_sample(self, env: fr.UnicastEnvelope) -> None:
        self.ingest(sample_from_dict(json.loads(env.body.decode())))

    # -- state fold -----------------------------------------------------------

    def query_state(self, at: Optional[int] = None) -> dict:
        """Network state at time `at`, a pure function of samples with
        sample.at <= at; arrival order never affects the result."""
        if at is None:
            at = self.host.now()
        return fold_state(s for s in self.samples if s.at <= at)

    def alerts(self, since: int = 0, until: Optional[int] = None) -> list[dict]:
        if until is None:
            until = self.host.now()
        state = fold_state(s for s in self.samples if s.at <= until)
        return [a for a in state["alerts"] if a["at"] >= since]


def fold_state(samples: Iterable[Sample]) -> dict:
    """Deterministic fold: same sample multiset -> same state dict."""
    ordered = sorted(samples, key=Sample.key)
    nodes: dict[str, dict] = {}
    links: dict[str, dict] = {}
    devices: dict[str, dict] = {}
    alerts: list[dict] = []
    last_alert: dict[tuple, int] = {}

    def raise_alert(at: int, severity: str, subtype: str, subject: str,
                    agent: str, **extra) -> None:
        key = (subtype, subject)
        prev = last_alert.get(key)
        if prev is not None and at - prev < ALERT_DEDUP_MS:
            return
        last_alert[key] = at
        alerts.append({"at": at, "severity": severity, "subtype": subtype,
                       "subject": subject, "agent": agent, **extra})

    for s in ordered:
        if s.kind == "link_stats":
            node = nodes.setdefault(s.agent, {})
            node.update({k: v for k, v in s.data.items() if k != "links"})
            node["last_seen"] = s.at
            for l in s.data.get("links", ()):
                lid = "|".join(sorted((s.agent, l["peer"])))
                prev = links.get(lid)
                entry = {"a": min(s.agent, l["peer"]),
                         "b": max(s.agent, l["peer"]),
                         "up": l["up"], "slow": l["slow"],
                         "latency_ms": l["latency_ms"],
                         "bandwidth_kbps": l["bandwidth_kbps"],
                         "reported_at": s.at, "reported_by": s.agent}
                if prev is None or (s.at, s.agent) >= (prev["reported_at"],
                                                       prev["reported_by"]):
                    links[lid] = entry
                if not l["up"]:
                    raise_alert(s.at, SEVERITY_WARNING, "link_down", lid,
                                s.agent)
                elif prev is not None and not prev["up"]:
                    last_alert.pop(("link_down", lid), None)
        elif s.kind == "device_seen":
            addr = s.data["address"]
            dev = devices.setdefault(addr, {})
            dev.update(s.data)
            dev.update({"node": s.agent, "reachable": True, "last_seen": s.at})
            last_alert.pop(("device_unreachable", addr), None)
            if s.data.get("compromised"):
                raise_alert(s.at, SEVERITY_CRITICAL, "device_compromised",
                            addr, s.agent)
        elif s.kind == "device_lost":
            addr = s.data["address"]
            dev = devices.setdefault(addr, {"address": addr, "node": s.agent})
            dev["reachable"] = False
            raise_alert(s.at, SEVERITY_WARNING, "device_unreachable", addr,
                        s.agent)
        elif s.kind == "ids_event":
            raise_alert(s.at, s.data.get("severity", SEVERITY_WARNING),
                        s.data["subtype"], s.data["subject"], s.agent,
                        **{k: v for k, v in s.data.items()
                           if k not in ("subtype", "subject", "severity")})

    return {
        "nodes": {k: nodes[k] for k in sorted(nodes)},
        "links": {k: links[k] for k in sorted(links)},
        "devices": {k: devices[k] for k in sorted(devices)},
        "alerts": alerts,
    }
