"""Mesh routing: neighbor discovery, link-state flooding, route + tree computation.

Every node runs the same three loops — periodic hellos per interface,
periodic link-state refresh floods, and hold-timer expiry — and computes
routes/trees from its own link-state database with deterministic
tie-breaks, so converged nodes agree without coordination.

Routing uses only *symmetric* edges: a link counts once both endpoints
advertise each other. Unreachable nodes simply drop out of the table.
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

from . import frames as fr
from . import kernels
from .engine import LinkSpec

log = logging.getLogger("phoenixsen.routing")

HELLO_INTERVAL_MS = 1_000
HOLD_TIME_MS = 3_000
FLOOD_INTERVAL_MS = 2_000
LSA_HOLD_MS = 3 * FLOOD_INTERVAL_MS
DEDUP_CACHE_SIZE = 4096


class NoRouteError(Exception):
    """Destination absent from the routing table."""


@dataclass
class Neighbor:
    node_id: str
    interface_index: int
    last_hello_at: int


@dataclass(frozen=True)
class LsaRecord:
    """One origin's advertisement: who it is and who it can hear."""

    origin: str
    seq: int
    neighbors: tuple[str, ...]
    utility: Optional[str]
    substation: Optional[int]
    received_at: int


class LinkStateDb:
    """Per-node view of the network; highest sequence number wins per origin."""

    def __init__(self) -> None:
        self.records: dict[str, LsaRecord] = {}

    def upsert(self, rec: LsaRecord) -> bool:
        """Store if newer than what we hold; returns True when state changed."""
        cur = self.records.get(rec.origin)
        if cur is not None and rec.seq <= cur.seq:
            return False
        self.records[rec.origin] = rec
        return True

    def expire(self, now: int, hold_ms: int = LSA_HOLD_MS) -> list[str]:
        dead = [o for o, r in self.records.items() if now - r.received_at >= hold_ms]
        for o in dead:
            del self.records[o]
        return dead

    def symmetric_edges(self) -> list[tuple[str, str]]:
        """Links confirmed from both ends, normalized and sorted."""
        edges = set()
        for rec in self.records.values():
            for nb in rec.neighbors:
                other = self.records.get(nb)
                if other is not None and rec.origin in other.neighbors:
                    edges.add((min(rec.origin, nb), max(rec.origin, nb)))
        return sorted(edges)

    def node_ids(self) -> list[str]:
        return sorted(self.records)


def compute_routes(db: LinkStateDb, self_id: str) -> dict[str, tuple[str, int]]:
    """Shortest hop-count paths from ``self_id``; ties take the smallest
    next-hop id. Returns {destination: (next_hop, hop_count)}."""
    ids = db.node_ids()
    if self_id not in ids:
        return {}
    index = {nid: i for i, nid in enumerate(ids)}
    edges = [(index[a], index[b]) for a, b in db.symmetric_edges()]
    dist, first = kernels.shortest_paths(len(ids), edges, index[self_id])
    table: dict[str, tuple[str, int]] = {}
    for nid, i in index.items():
        if nid != self_id and dist[i] > 0:
            table[nid] = (ids[first[i]], dist[i])
    return table


def compute_multicast_tree(db: LinkStateDb) -> frozenset[tuple[str, str]]:
    """Deterministic spanning forest over the symmetric edges (one tree per
    component); identical databases yield identical trees on every node."""
    ids = db.node_ids()
    index = {nid: i for i, nid in enumerate(ids)}
    edges = [(index[a], index[b]) for a, b in db.symmetric_edges()]
    chosen = kernels.spanning_tree(len(ids), edges)
    return frozenset((ids[a], ids[b]) for a, b in chosen)


class RoutingHost(Protocol):
    """What the protocol driver needs from its hosting node."""

    node_id: str

    def now(self) -> int: ...
    def call_at(self, at: int, fn: Callable[[], None]) -> object: ...
    def mesh_links(self) -> list[tuple[int, LinkSpec]]: ...
    def send_on(self, frame: object, link: LinkSpec) -> None: ...
    def log_event(self, kind: str, **fields: object) -> None: ...
    def routing_identity(self) -> tuple[Optional[str], Optional[int]]: ...
    def on_routes_changed(self) -> None: ...
    def deliver_multicast(self, origin: str, inner_kind: int, body: bytes) -> None: ...
    def deliver_unicast(self, env: fr.UnicastEnvelope) -> None: ...


class MeshRouting:
    """Per-node routing state machine, driven by the simulation clock."""

    def __init__(self, host: RoutingHost):
        self.host = host
        self.neighbors: dict[str, Neighbor] = {}
        self.db = LinkStateDb()
        self.table: dict[str, tuple[str, int]] = {}
        self.tree: frozenset[tuple[str, str]] = frozenset()
        self._hello_seq = 0
        self._lsa_seq = 0
        self._mcast_seq = 0
        self._unicast_seq = 0
        self._dedup: OrderedDict[tuple[str, int], None] = OrderedDict()
        self._identities: dict[str, tuple] = {}
        self._timers: list = []
        self.running = False

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self.running = True
        self._advertise()
        self._hello_tick()
        self._flood_tick()
        self._expiry_tick()

    def stop(self) -> None:
        self.running = False
        for t in self._timers:
            t.cancel()
        self._timers.clear()
        self.neighbors.clear()
        self.db = LinkStateDb()
        self.table = {}
        self.tree = frozenset()
        self._dedup.clear()
        self._identities = {}

    def _after(self, delay: int, fn: Callable[[], None]) -> None:
        self._timers.append(self.host.call_at(self.host.now() + delay, fn))

    # -- periodic loops -----------------------------------------------------

    def _hello_tick(self) -> None:
        if not self.running:
            return
        self.emit_hello()
        self._after(HELLO_INTERVAL_MS, self._hello_tick)

    def _flood_tick(self) -> None:
        if not self.running:
            return
        self._advertise()
        self._after(FLOOD_INTERVAL_MS, self._flood_tick)

    def _expiry_tick(self) -> None:
        if not self.running:
            return
        now = self.host.now()
        stale = [nid for nid, nb in self.neighbors.items()
                 if now - nb.last_hello_at >= HOLD_TIME_MS]
        for nid in stale:
            del self.neighbors[nid]
            self.host.log_event("neighbor_down", neighbor=nid)
        if self.db.expire(now):
            self._recompute()
        if stale:
            self._advertise()
        # Check twice per hello interval so expiries land within one tick
        # of the deadline without per-neighbor timer bookkeeping.
        self._after(HELLO_INTERVAL_MS // 2, self._expiry_tick)

    # -- hello / topology ---------------------------------------------------

    def emit_hello(self) -> None:
        for iface, link in self.host.mesh_links():
            self._hello_seq += 1
            self.host.send_on(
                fr.HelloFrame(self.host.node_id, self._hello_seq, iface), link)

    def on_hello(self, frame: fr.HelloFrame, iface: int) -> None:
        nb = self.neighbors.get(frame.origin)
        if nb is None:
            self.neighbors[frame.origin] = Neighbor(frame.origin, iface, self.host.now())
            self.host.log_event("neighbor_up", neighbor=frame.origin, interface=iface)
            self._advertise()
        else:
            nb.last_hello_at = self.host.now()
            nb.interface_index = iface

    def _advertise(self) -> None:
        """Originate a fresh advertisement and flood it."""
        self._lsa_seq += 1
        utility, substation = self.host.routing_identity()
        rec = LsaRecord(self.host.node_id, self._lsa_seq,
                        tuple(sorted(self.neighbors)), utility, substation,
                        self.host.now())
        self.db.upsert(rec)
        self._recompute()
        frame = fr.TopologyFrame(rec.origin, rec.seq, utility, substation,
                                 rec.neighbors)
        for _, link in self.host.mesh_links():
            self.host.send_on(frame, link)

    def on_topology(self, frame: fr.TopologyFrame, arrival: LinkSpec) -> None:
        rec = LsaRecord(frame.origin, frame.seq, frame.neighbors,
                        frame.utility, frame.substation, self.host.now())
        if frame.origin == self.host.node_id or not self.db.upsert(rec):
            return
        self._recompute()
        for _, link in self.host.mesh_links():
            if link is not arrival:
                self.host.send_on(frame, link)

    def _recompute(self) -> None:
        table = compute_routes(self.db, self.host.node_id)
        tree = compute_multicast_tree(self.db)
        identities = {o: (r.utility, r.substation)
                      for o, r in self.db.records.items()}
        changed = table != self.table or tree != self.tree
        if changed:
            self.table = table
            self.tree = tree
            self.host.log_event(
                "routes_changed",
                table={d: {"next_hop": nh, "hops": h} for d, (nh, h) in sorted(table.items())})
        if changed or identities != self._identities:
            # Reachability OR who-serves-which-substation changed; either
            # can move the formation phase, so the host hears about both.
            self._identities = identities
            self.host.on_routes_changed()

    # -- multicast ----------------------------------------------------------

    def _tree_links(self) -> list[LinkSpec]:
        me = self.host.node_id
        incident = set()
        for a, b in self.tree:
            if a == me:
                incident.add(b)
            elif b == me:
                incident.add(a)
        return [link for _, link in self.host.mesh_links()
                if link.other(me) in incident]

    def originate_multicast(self, inner_kind: int, body: bytes) -> None:
        """Flood a control payload along the spanning tree; the originator
        counts as the first delivery."""
        self._mcast_seq += 1
        frame = fr.MulticastFrame(self.host.node_id, self._mcast_seq, inner_kind, body)
        self._note_dedup(frame.dedup_key())
        self.host.log_event("mcast_deliver", origin=frame.origin, mseq=frame.seq)
        self.host.deliver_multicast(frame.origin, inner_kind, body)
        for link in self._tree_links():
            self.host.send_on(frame, link)

    def on_multicast(self, frame: fr.MulticastFrame, arrival: LinkSpec) -> None:
        key = frame.dedup_key()
        if key in self._dedup:
            self._dedup.move_to_end(key)
            self.host.log_event("mcast_dup", origin=frame.origin, mseq=frame.seq)
            return
        self._note_dedup(key)
        self.host.log_event("mcast_deliver", origin=frame.origin, mseq=frame.seq)
        self.host.deliver_multicast(frame.origin, frame.inner_kind, frame.body)
        for link in self._tree_links():
            if link is not arrival:
                self.host.send_on(frame, link)

    def _note_dedup(self, key: tuple[str, int]) -> None:
        self._dedup[key] = None
        if len(self._dedup) > DEDUP_CACHE_SIZE:
            self._dedup.popitem(last=False)

    # -- unicast ------------------------------------------------------------

    def send_unicast(self, dst: str, kind: int, body: bytes,
                     ttl: int = fr.DEFAULT_TTL) -> None:
        """Originate a routed control message; NoRouteError if dst unknown."""
        self._unicast_seq += 1
        env = fr.UnicastEnvelope(self.host.node_id, self._unicast_seq,
                                 dst, kind, body, ttl)
        if dst == self.host.node_id:
            self.host.deliver_unicast(env)
            return
        self._forward(env, origination=True)

    def on_unicast(self, env: fr.UnicastEnvelope) -> None:
        if env.dst == self.host.node_id:
            self.host.deliver_unicast(env)
            return
        try:
            self._forward(env, origination=False)
        except NoRouteError:
            pass  # already logged as a drop

    def _forward(self, env: fr.UnicastEnvelope, origination: bool) -> None:
        hop = self.table.get(env.dst)
        if hop is None:
            self.host.log_event("unicast_drop", reason="no_route",
                                origin=env.origin, dst=env.dst)
            raise NoRouteError(f"{self.host.node_id}: no route to {env.dst}")
        nxt = env.hop() if not origination else env
        if nxt.ttl <= 0:
            self.host.log_event("unicast_drop", reason="ttl",
                                origin=env.origin, dst=env.dst)
            return
        next_hop = hop[0]
        for _, link in self.host.mesh_links():
            if link.other(self.host.node_id) == next_hop:
                self.host.send_on(nxt, link)
                return
        # Route points at a neighbor we no longer share a live link with;
        # the next recompute will repair it. Count it as a routing drop.
        self.host.log_event("unicast_drop", reason="no_route",
                            origin=env.origin, dst=env.dst)

    def next_hop_toward(self, dst: str) -> Optional[str]:
        hop = self.table.get(dst)
        return hop[0] if hop else None
