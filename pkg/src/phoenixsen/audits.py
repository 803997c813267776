"""Post-run invariant audits over the event log and final network state.

Every audit in :data:`AUDITS` runs on every report — there are no silent
skips. An audit that finds nothing in its scope passes with ``checked=0``
and says so in its detail line; an audit that cannot complete because the
log is inconsistent (a delivery referencing an unknown transmission, a
record missing a field) fails loudly rather than skipping, since a log
that defeats its own audit is itself a defect.

Each audit examines one cross-cutting guarantee:

========================== =====================================================
sim-core/causality         every frame resolves at its computed arrival time,
                           never earlier than link latency allows
sim-core/conservation      every transmitted frame is delivered or dropped
                           exactly once (frames still in flight at the end of
                           the run are exempt, by their logged arrival time)
overlay/isolation          every tunnel delivery matches its send in VNI,
                           utility, and VLAN type — nothing crosses environments
overlay/transit-opacity    relays never alter a tunnel frame's addressing,
                           payload size, or environment en route
overlay/encap-overhead     every tunnel transmission costs exactly the fixed
                           per-frame overhead above the inner frame
mesh/no-duplicate-multicast each flooded message reaches each node at most once
dns/negative-timing        negative name answers conclude at exactly the
                           resolver timeout, never earlier or later
voip/call-outcomes         every scripted call and message reaches a terminal
                           outcome in its guard window; NotFound never
                           concludes before the resolver timeout
netmon/sample-order        each backend holds every agent's samples in strictly
                           increasing (timestamp, sequence) order
shield/secure-admission    while a shield enforces authenticated-only, no
                           unauthenticated frame is delivered to its device
config/phase-monotonic     formation phases never regress while the script
                           only adds capability
========================== =====================================================
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .frames import OVERLAY_OVERHEAD
from .shield import MODE_OPEN, POLICY_AUTH_ONLY, SECURE_MODES

log = logging.getLogger("phoenixsen.audits")

#: Scenario event kinds that can lawfully reduce a node's formation phase.
CAPABILITY_REMOVING_EVENTS = ("LinkDown", "NodeLeave")


@dataclass(frozen=True)
class AuditResult:
    """Outcome of one audit: what it verified, or the first counterexample."""

    name: str
    passed: bool
    checked: int
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "checked": self.checked, "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict) -> "AuditResult":
        return cls(d["name"], d["passed"], d["checked"], d["detail"])


def _by_kind(records: list[dict]) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {}
    for rec in records:
        out.setdefault(rec["kind"], []).append(rec)
    return out


def _fail(name: str, checked: int, detail: str) -> AuditResult:
    return AuditResult(name, False, checked, detail)


def _ok(name: str, checked: int, detail: str) -> AuditResult:
    return AuditResult(name, True, checked, detail)


# -- sim core ------------------------------------------------------------------


def audit_causality(net, records: list[dict]) -> AuditResult:
    name = "sim-core/causality"
    kinds = _by_kind(records)
    sent = {rec["tx"]: rec for rec in kinds.get("frame_sent", ())}
    checked = 0
    for rec in kinds.get("frame_delivered", ()) :
        src = sent.get(rec["tx"])
        if src is None:
            return _fail(name, checked,
                         f"delivery of unknown transmission tx={rec['tx']}")
        checked += 1
        if rec["t"] != src["arrive_at"]:
            return _fail(name, checked,
                         f"tx={rec['tx']} delivered at {rec['t']} but was due "
                         f"at {src['arrive_at']}")
        if rec["t"] - src["t"] < src["latency_ms"]:
            return _fail(name, checked,
                         f"tx={rec['tx']} beat light: took "
                         f"{rec['t'] - src['t']}ms on a "
                         f"{src['latency_ms']}ms link")
        if rec["latency"] != rec["t"] - src["t"]:
            return _fail(name, checked,
                         f"tx={rec['tx']} logged latency {rec['latency']} but "
                         f"elapsed {rec['t'] - src['t']}")
    for rec in kinds.get("frame_dropped", ()) :
        src = sent.get(rec["tx"])
        if src is None:
            return _fail(name, checked,
                         f"drop of unknown transmission tx={rec['tx']}")
        checked += 1
        if rec["t"] != src["arrive_at"]:
            return _fail(name, checked,
                         f"tx={rec['tx']} dropped at {rec['t']} but was due "
                         f"at {src['arrive_at']}")
    return _ok(name, checked,
               f"{checked} frame resolutions at their exact arrival times")


def audit_conservation(net, records: list[dict]) -> AuditResult:
    name = "sim-core/conservation"
    kinds = _by_kind(records)
    sent = {rec["tx"]: rec for rec in kinds.get("frame_sent", ())}
    end = net.sim.clock.now
    resolved: dict[int, str] = {}
    for kind in ("frame_delivered", "frame_dropped"):
        for rec in kinds.get(kind, ()):
            tx = rec["tx"]
            if tx not in sent:
                return _fail(name, len(resolved),
                             f"{kind} references unknown tx={tx}")
            if tx in resolved:
                return _fail(name, len(resolved),
                             f"tx={tx} resolved twice ({resolved[tx]} then "
                             f"{kind})")
            resolved[tx] = kind
    in_flight = 0
    for tx, rec in sent.items():
        if tx in resolved:
            continue
        if rec["arrive_at"] <= end:
            return _fail(name, len(resolved),
                         f"tx={tx} was due at {rec['arrive_at']} (run ended "
                         f"{end}) but never resolved")
        in_flight += 1
    return _ok(name, len(sent),
               f"{len(sent)} transmissions, {len(resolved)} resolved exactly "
               f"once, {in_flight} still in flight at cutoff")


# -- overlay ------------------------------------------------------------------


def audit_isolation(net, records: list[dict]) -> AuditResult:
    name = "overlay/isolation"
    kinds = _by_kind(records)
    origin: dict[int, dict] = {}
    for kind in ("overlay_sent", "lan_sent"):
        for rec in kinds.get(kind, ()):
            origin[rec["fid"]] = rec
    checked = 0
    for rec in kinds.get("overlay_delivered", ()):
        checked += 1
        src = origin.get(rec["fid"])
        if src is None:
            return _fail(name, checked,
                         f"delivery of fid={rec['fid']} at {rec['node']} with "
                         f"no matching send")
        for field_name in ("vni", "utility", "vlan_type"):
            if rec[field_name] != src[field_name]:
                return _fail(
                    name, checked,
                    f"fid={rec['fid']} crossed environments: sent "
                    f"{field_name}={src[field_name]!r}, delivered "
                    f"{field_name}={rec[field_name]!r} at {rec['node']}")
    return _ok(name, checked,
               f"{checked} deliveries all inside their sending environment")


def audit_transit_opacity(net, records: list[dict]) -> AuditResult:
    name = "overlay/transit-opacity"
    kinds = _by_kind(records)
    fixed_fields = ("vni", "src_node", "dst_node", "inner_src", "inner_dst",
                    "inner_size")
    first: dict[int, dict] = {}
    checked = 0
    for rec in kinds.get("frame_sent", ()):
        frame = rec.get("frame", {})
        if frame.get("type") != "overlay":
            continue
        fid = frame["fid"]
        seen = first.setdefault(fid, frame)
        if seen is frame:
            checked += 1
            continue
        for field_name in fixed_fields:
            if frame[field_name] != seen[field_name]:
                return _fail(
                    name, checked,
                    f"fid={fid} mutated in transit: {field_name} changed "
                    f"from {seen[field_name]!r} to {frame[field_name]!r}")
    return _ok(name, checked,
               f"{checked} tunneled frames unchanged across every relay hop")


def audit_encap_overhead(net, records: list[dict]) -> AuditResult:
    name = "overlay/encap-overhead"
    kinds = _by_kind(records)
    checked = 0
    for rec in kinds.get("frame_sent", ()):
        frame = rec.get("frame", {})
        if frame.get("type") != "overlay":
            continue
        checked += 1
        expected = frame["inner_size"] + OVERLAY_OVERHEAD
        if rec["size"] != expected:
            return _fail(name, checked,
                         f"fid={frame['fid']} wire size {rec['size']} != "
                         f"inner {frame['inner_size']} + "
                         f"{OVERLAY_OVERHEAD}")
    return _ok(name, checked,
               f"{checked} tunnel transmissions at exactly "
               f"+{OVERLAY_OVERHEAD} bytes")


# -- mesh ------------------------------------------------------------------


def audit_multicast_dedup(net, records: list[dict]) -> AuditResult:
    name = "mesh/no-duplicate-multicast"
    seen: dict[tuple, int] = {}
    checked = 0
    for rec in _by_kind(records).get("mcast_deliver", ()):
        checked += 1
        key = (rec["origin"], rec["mseq"], rec["node"])
        seen[key] = seen.get(key, 0) + 1
        if seen[key] > 1:
            return _fail(name, checked,
                         f"flood ({rec['origin']}, {rec['mseq']}) delivered "
                         f"{seen[key]} times at {rec['node']}")
    return _ok(name, checked,
               f"{checked} flood deliveries, none repeated at any node")


# -- dns ------------------------------------------------------------------


def audit_negative_timing(net, records: list[dict]) -> AuditResult:
    name = "dns/negative-timing"
    checked = 0
    for rec in _by_kind(records).get("dns_negative", ()):
        checked += 1
        node = net.nodes.get(rec["node"])
        expected = node.dns.timeout_ms if node is not None else 3000
        if rec["latency"] != expected:
            return _fail(name, checked,
                         f"negative answer for {rec['name']!r} at "
                         f"{rec['node']} took {rec['latency']}ms, timeout is "
                         f"{expected}ms")
    return _ok(name, checked,
               f"{checked} negative answers all at the exact timeout")


# -- voip ------------------------------------------------------------------


def _match_outcomes(events: list[dict], outcomes: list[dict],
                    node_of: Callable[[dict], str],
                    key_of: Callable[[dict], str],
                    guard_ms: int, end: int) -> Optional[str]:
    """Greedy one-to-one matching of scripted requests to logged outcomes.

    Returns an error string for the first request whose guard window closed
    inside the run without a matching outcome record.
    """
    available = [dict(rec, _used=False) for rec in outcomes]
    for ev in sorted(events, key=lambda e: e["t"]):
        payload = ev["payload"]
        deadline = ev["t"] + guard_ms
        if deadline > end:
            continue  # guard window still open at cutoff
        hit = None
        for rec in available:
            if rec["_used"] or rec["node"] != node_of(payload):
                continue
            if key_of(rec) != key_of(payload):
                continue
            if ev["t"] <= rec["t"] <= deadline:
                hit = rec
                break
        if hit is None:
            return (f"request at t={ev['t']} on {node_of(payload)} for "
                    f"{key_of(payload)!r} has no outcome by t={deadline}")
        hit["_used"] = True
    return None


def audit_call_outcomes(net, records: list[dict]) -> AuditResult:
    name = "voip/call-outcomes"
    kinds = _by_kind(records)
    valid = {"connected", "not_found", "conflict"}
    checked = 0
    for rec in kinds.get("call_attempt", ()):
        checked += 1
        if rec["outcome"] not in valid:
            return _fail(name, checked,
                         f"call to {rec['number']} ended {rec['outcome']!r}")
        node = net.nodes.get(rec["node"])
        timeout = node.dns.timeout_ms if node is not None else 3000
        if rec["outcome"] == "not_found" and rec["setup_latency"] < timeout:
            return _fail(name, checked,
                         f"call to {rec['number']} reported NotFound after "
                         f"only {rec['setup_latency']}ms (timeout "
                         f"{timeout}ms)")
    end = net.sim.clock.now
    events = [rec for rec in kinds.get("scenario_event", ())
              if rec["event"] == "PlaceCall"]
    err = _match_outcomes(
        events, kinds.get("call_attempt", []),
        node_of=lambda p: p["node"], key_of=lambda r: r["number"],
        guard_ms=2 * 3000 + 1000, end=end)
    if err:
        return _fail(name, checked, "silent call loss: " + err)
    msg_events = [rec for rec in kinds.get("scenario_event", ())
                  if rec["event"] == "SendMessage"]
    err = _match_outcomes(
        msg_events, kinds.get("msg_receipt", []),
        node_of=lambda p: p["node"], key_of=lambda r: r["to"],
        guard_ms=2 * 3000 + 1000, end=end)
    if err:
        return _fail(name, checked, "silent message loss: " + err)
    return _ok(name, checked,
               f"{checked} call attempts terminal and well-timed; every "
               f"scripted call and message concluded")


# -- netmon ------------------------------------------------------------------


def audit_sample_order(net, records: list[dict]) -> AuditResult:
    name = "netmon/sample-order"
    checked = 0
    for node_id in sorted(net.nodes):
        node = net.nodes[node_id]
        backend = getattr(node, "backend", None)
        if backend is None:
            continue
        last: dict[str, tuple[int, int]] = {}
        for sample in backend.samples:
            checked += 1
            key = (sample.at, sample.seq)
            prev = last.get(sample.agent)
            if prev is not None and key <= prev:
                return _fail(name, checked,
                             f"backend {node_id} holds {sample.agent} sample "
                             f"{key} after {prev}")
            last[sample.agent] = key
    return _ok(name, checked,
               f"{checked} stored samples in strict per-agent order")


# -- shield ------------------------------------------------------------------


def audit_secure_admission(net, records: list[dict]) -> AuditResult:
    name = "shield/secure-admission"
    kinds = _by_kind(records)
    device_of: dict[tuple[str, str], str] = {}
    for rec in kinds.get("shield_paired", ()):
        device_of[(rec["node"], rec["shield"])] = rec["device"]
    # Build per-device activation timelines: list of ((t, seq), enforcing).
    timelines: dict[tuple[str, str], list[tuple[tuple[int, int], bool]]] = {}
    for rec in kinds.get("shield_activated", ()):
        device = device_of.get((rec["node"], rec["shield"]))
        if device is None:
            return _fail(name, 0,
                         f"activation of unpaired shield {rec['shield']} at "
                         f"{rec['node']}")
        enforcing = (rec["mode"] in SECURE_MODES
                     and rec["mode"] != MODE_OPEN
                     and rec["policy"] == POLICY_AUTH_ONLY)
        timelines.setdefault((rec["node"], device), []).append(
            ((rec["t"], rec["seq"]), enforcing))
    checked = 0
    for rec in kinds.get("overlay_delivered", ()):
        timeline = timelines.get((rec["node"], rec["device"]))
        if not timeline:
            continue
        checked += 1
        when = (rec["t"], rec["seq"])
        state = False
        for stamp, enforcing in timeline:
            if stamp < when:
                state = enforcing
        if state and not rec["authenticated"]:
            return _fail(name, checked,
                         f"unauthenticated frame delivered to shielded "
                         f"{rec['device']} at {rec['node']} t={rec['t']}")
    return _ok(name, checked,
               f"{checked} deliveries to shielded devices respected "
               f"authenticated-only windows")


# -- deployment ------------------------------------------------------------------


def audit_phase_monotonic(net, records: list[dict]) -> AuditResult:
    name = "config/phase-monotonic"
    kinds = _by_kind(records)
    horizon: Optional[tuple[int, int]] = None
    for rec in kinds.get("scenario_event", ()):
        if rec["event"] in CAPABILITY_REMOVING_EVENTS:
            stamp = (rec["t"], rec["seq"])
            if horizon is None or stamp < horizon:
                horizon = stamp
    checked = 0
    last: dict[str, int] = {}
    for rec in kinds.get("phase_changed", ()):
        if not 1 <= rec["phase"] <= 4:
            return _fail(name, checked,
                         f"{rec['node']} reported phase {rec['phase']}")
        if horizon is not None and (rec["t"], rec["seq"]) >= horizon:
            continue  # capability was removed; regression is lawful
        checked += 1
        prev = last.get(rec["node"], 0)
        if rec["phase"] < prev:
            return _fail(name, checked,
                         f"{rec['node']} regressed from phase {prev} to "
                         f"{rec['phase']} at t={rec['t']} with no capability "
                         f"removed")
        last[rec["node"]] = rec["phase"]
    scope = ("entire run" if horizon is None else
             f"additive prefix (capability first removed at t={horizon[0]})")
    return _ok(name, checked,
               f"{checked} phase transitions non-decreasing over {scope}")


#: The registry: every entry runs on every report, in this order.
AUDITS: tuple[tuple[str, Callable], ...] = (
    ("sim-core/causality", audit_causality),
    ("sim-core/conservation", audit_conservation),
    ("overlay/isolation", audit_isolation),
    ("overlay/transit-opacity", audit_transit_opacity),
    ("overlay/encap-overhead", audit_encap_overhead),
    ("mesh/no-duplicate-multicast", audit_multicast_dedup),
    ("dns/negative-timing", audit_negative_timing),
    ("voip/call-outcomes", audit_call_outcomes),
    ("netmon/sample-order", audit_sample_order),
    ("shield/secure-admission", audit_secure_admission),
    ("config/phase-monotonic", audit_phase_monotonic),
)


def run_audits(net, records: Iterable[dict]) -> list[AuditResult]:
    """Run every registered audit; one result per audit, never skipped."""
    recs = list(records)
    results = []
    for name, fn in AUDITS:
        try:
            result = fn(net, recs)
        except Exception as exc:  # an audit must never die silently
            result = _fail(name, 0, f"audit crashed: {exc!r}")
        results.append(result)
        log.debug("audit %s: %s", name, "PASS" if result.passed else "FAIL")
    return results
