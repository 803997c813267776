"""Masterless shared-zone DNS with service discovery.

Every node is authoritative for what was registered locally and replicates
every other node's records via periodic full-state publications flooded on
the multicast tree. Resolution is two-step: answer from the local store
(authoritative + replicas) with zero latency, otherwise multicast the
query and complete on the first answering tick — merging everything that
arrives in that tick — or report a negative result after exactly the
configured timeout.

Replicas live on a hold timer of two publish intervals (capped by the
record's own ttl) so records of departed nodes age out without a master.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import frames as fr
from .routing import NoRouteError

log = logging.getLogger("phoenixsen.dnssd")

ZONE = "phxnet.org"
RRTYPES = ("A", "PTR", "SRV", "CNAME", "TXT")

DEFAULT_TTL_S = 3600
PUBLISH_INTERVAL_MS = 10_000
REPLICA_HOLD_MS = 2 * PUBLISH_INTERVAL_MS
DEFAULT_TIMEOUT_MS = 3_000

_DOMAIN_RDATA = ("CNAME", "PTR")


class DuplicateNameError(Exception):
    """A different origin already holds an alive claim on this hostname."""


def normalize_name(name: str) -> str:
    return name.rstrip(".").lower()


def reverse_name(address: str) -> str:
    octets = address.split(".")
    return ".".join(reversed(octets)) + ".in-addr.arpa"


@dataclass(frozen=True)
class ResourceRecord:
    """One record of the shared zone; origin is the registering node."""

    name: str
    rrtype: str
    ttl: int
    rdata: str
    origin: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", normalize_name(self.name))
        if self.rrtype not in RRTYPES:
            raise ValueError(f"unsupported record type {self.rrtype!r}")

    def key(self) -> tuple[str, str, str, str]:
        return (self.name, self.rrtype, self.rdata, self.origin)

    def rendered_rdata(self) -> str:
        """Zone-file presentation: domain-name targets get a trailing dot."""
        if self.rrtype in _DOMAIN_RDATA:
            return self.rdata + "."
        if self.rrtype == "SRV":
            head, _, target = self.rdata.rpartition(" ")
            return f"{head} {target}."
        return self.rdata

    def canonical(self) -> str:
        return f"{self.name}. IN {self.rrtype} {self.rendered_rdata()}"

    def zone_line(self) -> str:
        return (f"{self.name}. {self.ttl} IN {self.rrtype} "
                f"{self.rendered_rdata()} ; origin={self.origin}")


@dataclass(frozen=True)
class QueryResult:
    records: tuple[ResourceRecord, ...]
    sources: frozenset[str]
    latency: int
    negative: bool


@dataclass
class _Stored:
    record: ResourceRecord
    registered_at: int
    expires_at: Optional[int]  # None = held while the owning service keeps it
    replica: bool


@dataclass
class _Pending:
    qid: int
    name: str
    rrtype: str
    started_at: int
    on_done: Callable[[QueryResult], None]
    records: dict = field(default_factory=dict)
    sources: set = field(default_factory=set)
    timeout_handle: object = None
    finish_armed: bool = False
    done: bool = False


class DnsService:
    """Per-node resolver + authoritative/replica store for the shared zone.

    ``host`` is the owning node's service facade: node_id, now(), call_at(),
    originate_multicast(), send_unicast(), log_event().
    """

    def __init__(self, host) -> None:
        self.host = host
        self.store: dict[tuple, _Stored] = {}
        self.timeout_ms = DEFAULT_TIMEOUT_MS
        self._qids = 0
        self._pending: dict[tuple[str, int], _Pending] = {}
        self._changed = False
        self._flush_armed = False
        self._timers: list = []
        self.running = False

    # -- lifecycle ------------------------------------------------------

    def start(self) -> None:
        self.running = True
        self._publish_tick()

    def stop(self) -> None:
        self.running = False
        for t in self._timers:
            t.cancel()
        self._timers.clear()
        self.store.clear()
        self._pending.clear()

    def _after(self, delay: int, fn: Callable[[], None]) -> None:
        self._timers.append(self.host.call_at(self.host.now() + delay, fn))

    # -- registration -----------------------------------------------------

    def register(self, record: ResourceRecord, lease_ms: Optional[int] = None) -> None:
        """Upsert an authoritative record; triggers a coalesced publish."""
        now = self.host.now()
        expires = now + lease_ms if lease_ms is not None else None
        self.store[record.key()] = _Stored(record, now, expires, replica=False)
        self.host.log_event("dns_register", record=record.canonical(),
                            origin=record.origin)
        self._mark_changed()

    def withdraw(self, name: str, rrtype: Optional[str] = None,
                 rdata: Optional[str] = None) -> int:
        """Remove matching authoritative records; returns how many."""
        name = normalize_name(name)
        victims = [k for k, s in self.store.items()
                   if not s.replica and s.record.name == name
                   and (rrtype is None or s.record.rrtype == rrtype)
                   and (rdata is None or s.record.rdata == rdata)]
        for k in victims:
            del self.store[k]
        if victims:
            self.host.log_event("dns_withdraw", name=name, count=len(victims))
            self._mark_changed()
        return len(victims)

    def assign_hostname(self, device_name: str, address: str) -> str:
        """Claim `<device>.phxnet.org`; first-come-first-serve network-wide."""
        fqdn = normalize_name(f"{device_name}.{ZONE}")
        claims = self.lookup_local(fqdn, "A")
        foreign = [r for r in claims if r.origin != self.host.node_id]
        if foreign:
            raise DuplicateNameError(
                f"{fqdn} already claimed by {sorted(r.origin for r in foreign)[0]}")
        self.register(ResourceRecord(fqdn, "A", DEFAULT_TTL_S, address,
                                     self.host.node_id))
        self.register(ResourceRecord(reverse_name(address), "PTR", DEFAULT_TTL_S,
                                     fqdn, self.host.node_id))
        return fqdn

    # -- local store ------------------------------------------------------

    def _sweep(self) -> None:
        now = self.host.now()
        dead = [k for k, s in self.store.items()
                if s.expires_at is not None and now >= s.expires_at]
        for k in dead:
            del self.store[k]

    def lookup_local(self, name: str, rrtype: str) -> list[ResourceRecord]:
        self._sweep()
        name = normalize_name(name)
        found = [s.record for s in self.store.values()
                 if s.record.name == name and s.record.rrtype == rrtype]
        return sorted(found, key=lambda r: (r.origin, r.rdata))

    def zone_dump(self) -> str:
        self._sweep()
        lines = sorted(s.record.zone_line() for s in self.store.values())
        return "\n".join(lines) + ("\n" if lines else "")

    def own_records(self) -> list[ResourceRecord]:
        self._sweep()
        return sorted((s.record for s in self.store.values() if not s.replica),
                      key=lambda r: r.key())

    # -- publication ------------------------------------------------------

    def _mark_changed(self) -> None:
        self._changed = True
        if not self._flush_armed and self.running:
            self._flush_armed = True
            # Coalesce every registration in this tick into one publication.
            self._timers.append(self.host.call_at(self.host.now(), self._flush))

    def _flush(self) -> None:
        self._flush_armed = False
        if self.running and self._changed:
            self.publish_zone()

    def _publish_tick(self) -> None:
        if not self.running:
            return
        # Unconditional refresh keeps replica hold timers alive on peers.
        self.publish_zone(forced=True)
        self._after(PUBLISH_INTERVAL_MS, self._publish_tick)

    def publish_zone(self, forced: bool = False) -> bool:
        """Announce the full own-origin record set; no frames when nothing
        changed and not forced. Returns whether a publication went out."""
        if not self._changed and not forced:
            return False
        self._changed = False
        body = fr.canonical_json({
            "records": [[r.name, r.rrtype, r.ttl, r.rdata]
                        for r in self.own_records()],
        })
        self.host.originate_multicast(fr.MK_DNS_PUBLISH, body)
        return True

    def on_publish(self, origin: str, body: bytes) -> None:
        """Full-state sync: replace everything replicated from this origin."""
        if origin == self.host.node_id:
            return
        now = self.host.now()
        payload = json.loads(body.decode())
        stale = [k for k, s in self.store.items()
                 if s.replica and s.record.origin == origin]
        for k in stale:
            del self.store[k]
        for name, rrtype, ttl, rdata in payload["records"]:
            rec = ResourceRecord(name, rrtype, ttl, rdata, origin)
            hold = min(REPLICA_HOLD_MS, ttl * 1000)
            self.store[rec.key()] = _Stored(rec, now, now + hold, replica=True)

    # -- resolution -------------------------------------------------------

    def resolve(self, name: str, rrtype: str,
                on_done: Callable[[QueryResult], None],
                timeout_ms: Optional[int] = None) -> None:
        """Local store first (latency 0); else multicast query. The result
        callback runs exactly once."""
        name = normalize_name(name)
        local = self.lookup_local(name, rrtype)
        if local:
            on_done(QueryResult(tuple(local),
                                frozenset(r.origin for r in local), 0, False))
            return
        timeout = self.timeout_ms if timeout_ms is None else timeout_ms
        self._qids += 1
        qid = self._qids
        pending = _Pending(qid, name, rrtype, self.host.now(), on_done)
        self._pending[(self.host.node_id, qid)] = pending
        body = fr.canonical_json({"qid": qid, "name": name, "rrtype": rrtype})
        self.host.originate_multicast(fr.MK_DNS_QUERY, body)

        def _timeout() -> None:
            if pending.done:
                return
            pending.done = True
            self._pending.pop((self.host.node_id, qid), None)
            self.host.log_event("dns_negative", name=name, rrtype=rrtype,
                                latency=timeout)
            on_done(QueryResult((), frozenset(), timeout, True))

        pending.timeout_handle = self.host.call_at(self.host.now() + timeout,
                                                   _timeout)
        self._timers.append(pending.timeout_handle)

    def on_query(self, origin: str, body: bytes) -> None:
        """Answer a flooded query when this store knows matching records."""
        if origin == self.host.node_id:
            return
        q = json.loads(body.decode())
        matches = self.lookup_local(q["name"], q["rrtype"])
        if not matches:
            return
        answer = fr.canonical_json({
            "qid": q["qid"],
            "records": [[r.name, r.rrtype, r.ttl, r.rdata, r.origin]
                        for r in matches],
        })
        try:
            self.host.send_unicast(origin, fr.UK_DNS_ANSWER, answer)
        except NoRouteError:
            # A flooded query can outrun the reverse route while the mesh
            # converges. Losing the answer is safe: the querier times out
            # and whoever wanted the record asks again.
            pass

    def on_answer(self, env: fr.UnicastEnvelope) -> None:
        """Collect an answer; complete at the end of the first answering tick."""
        payload = json.loads(env.body.decode())
        pending = self._pending.get((self.host.node_id, payload["qid"]))
        if pending is None or pending.done:
            return
        for name, rrtype, ttl, rdata, origin in payload["records"]:
            rec = ResourceRecord(name, rrtype, ttl, rdata, origin)
            pending.records[rec.key()] = rec
            pending.sources.add(origin)
        if not pending.finish_armed:
            pending.finish_armed = True
            self._timers.append(self.host.call_at(self.host.now(),
                                                  lambda: self._finish(pending)))

    def _finish(self, pending: _Pending) -> None:
        if pending.done:
            return
        pending.done = True
        if pending.timeout_handle is not None:
            pending.timeout_handle.cancel()
        self._pending.pop((self.host.node_id, pending.qid), None)
        records = tuple(sorted(pending.records.values(),
                               key=lambda r: (r.origin, r.rdata)))
        latency = self.host.now() - pending.started_at
        pending.on_done(QueryResult(records, frozenset(pending.sources),
                                    latency, False))

    # -- service discovery --------------------------------------------------

    def discover_service(self, label: str,
                         on_done: Callable[[list[tuple[str, int, int]]], None],
                         timeout_ms: Optional[int] = None) -> None:
        """PTR walk then SRV per pointer; results sorted (priority, target)."""
        ptr_name = normalize_name(f"{label}.{ZONE}")

        def after_ptr(ptr_result: QueryResult) -> None:
            targets = sorted({r.rdata for r in ptr_result.records})
            if not targets:
                on_done([])
                return
            found: list[tuple[str, int, int]] = []
            remaining = {"n": len(targets)}

            def after_srv(srv_result: QueryResult) -> None:
                for rec in srv_result.records:
                    try:
                        priority, _weight, port, target = rec.rdata.split()
                        found.append((normalize_name(target), int(port),
                                      int(priority)))
                    except ValueError:
                        log.warning("malformed SRV rdata %r", rec.rdata)
                remaining["n"] -= 1
                if remaining["n"] == 0:
                    on_done(sorted(set(found), key=lambda e: (e[2], e[0])))

            for t in targets:
                self.resolve(t, "SRV", after_srv, timeout_ms)

        self.resolve(ptr_name, "PTR", after_ptr, timeout_ms)
