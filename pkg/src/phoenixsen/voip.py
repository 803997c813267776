"""VoIP signaling: registration, DNS-backed call routing, roaming, messaging.

The dial plan lives entirely in DNS: registering number N at node X
publishes `N._voip.phxnet.org → voip-X.phxnet.org`, and call routing is a
CNAME lookup followed by an invite/answer exchange with the registrar.
No node holds any routing table for numbers beyond its own registrations.

Media is not simulated; the transcode flag is a path predicate (any slow
link on the unicast path between caller and registrar).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import frames as fr
from .dnssd import ZONE, QueryResult, ResourceRecord
from .routing import NoRouteError

log = logging.getLogger("phoenixsen.voip")

REGISTRATION_TTL_S = 120
CLIENT_KINDS = ("DECT", "Desk", "Web", "Mobile")

OUTCOME_CONNECTED = "connected"
OUTCOME_NOT_FOUND = "not_found"
OUTCOME_CONFLICT = "conflict"


class EnvironmentMissingError(Exception):
    """The node hosts no VoIP environment (unconfigured or not in plan)."""


class NotRegisteredError(Exception):
    """Sender's number has no live registration at this node."""


def voip_host(node_id: str) -> str:
    return f"voip-{node_id}.{ZONE}".lower()


def number_record_name(number: str) -> str:
    return f"{number}._voip.{ZONE}"


def node_from_voip_host(target: str) -> Optional[str]:
    target = target.rstrip(".").lower()
    if target.startswith("voip-") and target.endswith("." + ZONE):
        return target[len("voip-"):-len("." + ZONE)]
    return None


@dataclass(frozen=True)
class VoipClient:
    number: str
    kind: str
    home_node: str

    def __post_init__(self) -> None:
        if not (self.number.isdigit() and len(self.number) == 4):
            raise ValueError(f"number must be 4 digits, got {self.number!r}")
        if self.kind not in CLIENT_KINDS:
            raise ValueError(f"unknown client kind {self.kind!r}")


@dataclass
class Registration:
    number: str
    kind: str
    registrar_node: str
    expires_at: int
    refreshing: bool = True


@dataclass(frozen=True)
class CallAttempt:
    caller_node: str
    callee_number: str
    outcome: str
    target: Optional[str]
    setup_latency: int
    transcoded: bool

    def to_dict(self) -> dict:
        return {"caller": self.caller_node, "number": self.callee_number,
                "outcome": self.outcome, "target": self.target,
                "setup_latency": self.setup_latency, "transcoded": self.transcoded}


@dataclass
class _PendingCall:
    call_id: int
    number: str
    started_at: int
    on_done: Callable[[CallAttempt], None]
    done: bool = False
    guard: object = None


class VoipService:
    """Per-node registrar and signaling endpoint.

    ``host`` facade: node_id, now(), call_at(), dns (DnsService),
    send_unicast(), log_event(), plan_media_path(target) -> bool,
    raise_alert(subtype, subject), dial_prefix, has_voip_env().
    """

    def __init__(self, host) -> None:
        self.host = host
        self.registrations: dict[str, Registration] = {}
        self.message_log: list[dict] = []
        self.call_log: list[CallAttempt] = []
        self._call_ids = 0
        self._msg_ids = 0
        self._pending_calls: dict[int, _PendingCall] = {}
        self._pending_msgs: dict[int, dict] = {}
        self._timers: list = []
        self.running = False

    def start(self) -> None:
        self.running = True
        node = self.host.node_id
        # The registrar's own service records: address, SRV, discovery PTR.
        addr = self.host.voip_address()
        self.host.dns.register(ResourceRecord(voip_host(node), "A",
                                              3600, addr, node))
        inst = f"{node}._sip._udp.{ZONE}"
        self.host.dns.register(ResourceRecord(f"_sip._udp.{ZONE}", "PTR",
                                              3600, inst, node))
        self.host.dns.register(ResourceRecord(inst, "SRV", 3600,
                                              f"0 0 5060 {voip_host(node)}", node))

    def stop(self) -> None:
        self.running = False
        for t in self._timers:
            t.cancel()
        self._timers.clear()
        self.registrations.clear()
        self._pending_calls.clear()
        self._pending_msgs.clear()

    def _after(self, delay: int, fn: Callable[[], None]) -> None:
        self._timers.append(self.host.call_at(self.host.now() + delay, fn))

    # -- registration -------------------------------------------------------

    def register_client(self, client: VoipClient, roamed: bool = False) -> Registration:
        """Register a number here and publish its CNAME mapping."""
        if not self.host.has_voip_env():
            raise EnvironmentMissingError(
                f"{self.host.node_id} hosts no VoIP environment")
        if not roamed and not client.number.startswith(self.host.dial_prefix()):
            raise ValueError(
                f"number {client.number} does not match dial prefix "
                f"{self.host.dial_prefix()} of {self.host.node_id}")
        now = self.host.now()
        reg = Registration(client.number, client.kind, self.host.node_id,
                           now + REGISTRATION_TTL_S * 1000)
        self.registrations[client.number] = reg
        self.host.dns.register(ResourceRecord(
            number_record_name(client.number), "CNAME", REGISTRATION_TTL_S,
            voip_host(self.host.node_id), self.host.node_id))
        self.host.log_event("voip_register", number=client.number,
                            client_kind=client.kind, roamed=roamed)
        self._after(REGISTRATION_TTL_S * 1000 // 2,
                    lambda: self._refresh(client.number))
        self._after(REGISTRATION_TTL_S * 1000,
                    lambda: self._expire(client.number))
        return reg

    def _refresh(self, number: str) -> None:
        reg = self.registrations.get(number)
        if reg is None or not reg.refreshing or not self.running:
            return
        reg.expires_at = self.host.now() + REGISTRATION_TTL_S * 1000
        self.host.dns.register(ResourceRecord(
            number_record_name(number), "CNAME", REGISTRATION_TTL_S,
            voip_host(self.host.node_id), self.host.node_id))
        self._after(REGISTRATION_TTL_S * 1000 // 2, lambda: self._refresh(number))

    def _expire(self, number: str) -> None:
        reg = self.registrations.get(number)
        if reg is None or not self.running:
            return
        if self.host.now() >= reg.expires_at:
            del self.registrations[number]
            self.host.dns.withdraw(number_record_name(number), "CNAME")
            self.host.log_event("voip_expired", number=number)
        else:
            self._after(reg.expires_at - self.host.now(),
                        lambda: self._expire(number))

    def release_dns(self, number: str) -> None:
        """Client roamed away: withdraw the CNAME immediately but keep the
        SIP registration until its lease runs out (calls routed here during
        the propagation window still connect)."""
        reg = self.registrations.get(number)
        if reg is not None:
            reg.refreshing = False
        self.host.dns.withdraw(number_record_name(number), "CNAME")

    # -- calls ---------------------------------------------------------------

    def route_call(self, number: str,
                   on_done: Callable[[CallAttempt], None]) -> None:
        """Resolve the number's CNAME and run the invite exchange; always
        terminates with an outcome (never silent loss)."""
        t0 = self.host.now()
        caller = self.host.node_id

        def conclude(outcome: str, target: Optional[str],
                     transcoded: bool = False) -> None:
            attempt = CallAttempt(caller, number, outcome, target,
                                  self.host.now() - t0, transcoded)
            self.call_log.append(attempt)
            self.host.log_event("call_attempt", **attempt.to_dict())
            on_done(attempt)

        def not_found_at_timeout() -> None:
            due = max(t0 + self.host.dns.timeout_ms, self.host.now())
            self._timers.append(self.host.call_at(
                due, lambda: conclude(OUTCOME_NOT_FOUND, None)))

        def after_resolve(result: QueryResult) -> None:
            if result.negative:
                conclude(OUTCOME_NOT_FOUND, None)
                return
            targets = sorted({node for r in result.records
                              if (node := node_from_voip_host(r.rdata))})
            if not targets:
                not_found_at_timeout()
                return
            if len(targets) > 1:
                chosen = targets[0]
                self.host.raise_alert("number_conflict",
                                      f"{number} -> {','.join(targets)}")
                conclude(OUTCOME_CONFLICT, chosen)
                return
            target = targets[0]
            if target == caller:
                if number in self.registrations:
                    conclude(OUTCOME_CONNECTED, caller, transcoded=False)
                else:
                    not_found_at_timeout()
                return
            self._invite(number, target, t0, conclude, not_found_at_timeout)

        self.host.dns.resolve(number_record_name(number), "CNAME", after_resolve)

    def _invite(self, number: str, target: str, t0: int,
                conclude, not_found_at_timeout) -> None:
        self._call_ids += 1
        call_id = self._call_ids

        def on_answer(ok: bool) -> None:
            pend = self._pending_calls.pop(call_id, None)
            if pend is None or pend.done:
                return
            pend.done = True
            if pend.guard is not None:
                pend.guard.cancel()
            if ok:
                try:
                    transcoded = self.host.plan_media_path(target)
                except NoRouteError:
                    transcoded = False
                conclude(OUTCOME_CONNECTED, target, transcoded)
            else:
                not_found_at_timeout()

        pend = _PendingCall(call_id, number, t0, on_answer)
        self._pending_calls[call_id] = pend

        def guard() -> None:
            stale = self._pending_calls.pop(call_id, None)
            if stale is not None and not stale.done:
                stale.done = True
                conclude(OUTCOME_NOT_FOUND, None)

        pend.guard = self.host.call_at(t0 + 2 * self.host.dns.timeout_ms, guard)
        self._timers.append(pend.guard)
        body = fr.canonical_json({"sip": "invite", "call_id": call_id,
                                  "number": number, "from": self.host.node_id})
        try:
            self.host.send_unicast(target, fr.UK_SIP, body)
        except NoRouteError:
            pass  # guard timer concludes the attempt

    def on_sip(self, env: fr.UnicastEnvelope) -> None:
        msg = json.loads(env.body.decode())
        if msg["sip"] == "invite":
            live = msg["number"] in self.registrations
            reply = fr.canonical_json({
                "sip": "answer", "call_id": msg["call_id"], "ok": live,
                "target": self.host.node_id})
            try:
                self.host.send_unicast(env.origin, fr.UK_SIP, reply)
            except NoRouteError:
                pass
            self.host.log_event("sip_invite", number=msg["number"],
                                caller=msg["from"], accepted=live)
        elif msg["sip"] == "answer":
            pend = self._pending_calls.get(msg["call_id"])
            if pend is not None and not pend.done:
                pend.on_done(msg["ok"])

    # -- messaging ------------------------------------------------------------

    def send_message(self, from_number: str, to_number: str, body: str,
                     on_done: Callable[[dict], None]) -> None:
        """Route a text to a number's registrar; receipt always terminal."""
        if from_number not in self.registrations:
            raise NotRegisteredError(
                f"{from_number} has no live registration at {self.host.node_id}")
        t0 = self.host.now()

        def conclude(outcome: str, target: Optional[str],
                     conflict: bool = False) -> None:
            receipt = {"to": to_number, "outcome": outcome, "target": target,
                       "latency": self.host.now() - t0, "conflict": conflict}
            self.host.log_event("msg_receipt", sender=from_number, **receipt)
            on_done(receipt)

        def after_resolve(result: QueryResult) -> None:
            if result.negative:
                conclude(OUTCOME_NOT_FOUND, None)
                return
            targets = sorted({node for r in result.records
                              if (node := node_from_voip_host(r.rdata))})
            if not targets:
                conclude(OUTCOME_NOT_FOUND, None)
                return
            conflict = len(targets) > 1
            if conflict:
                self.host.raise_alert("number_conflict",
                                      f"{to_number} -> {','.join(targets)}")
            target = targets[0]
            if target == self.host.node_id:
                ok = self.deliver_message(from_number, to_number, body)
                conclude("delivered" if ok else OUTCOME_NOT_FOUND,
                         target if ok else None, conflict)
                return
            self._msg_ids += 1
            msg_id = self._msg_ids
            self._pending_msgs[msg_id] = {"conclude": conclude,
                                          "conflict": conflict,
                                          "target": target, "done": False}

            def guard() -> None:
                pend = self._pending_msgs.pop(msg_id, None)
                if pend is not None and not pend["done"]:
                    pend["done"] = True
                    conclude(OUTCOME_NOT_FOUND, None, conflict)

            self._timers.append(self.host.call_at(
                t0 + 2 * self.host.dns.timeout_ms, guard))
            payload = fr.canonical_json({
                "msg": "deliver", "msg_id": msg_id, "from": from_number,
                "to": to_number, "body": body, "reply_to": self.host.node_id})
            try:
                self.host.send_unicast(target, fr.UK_MSG, payload)
            except NoRouteError:
                pass  # guard concludes

        self.host.dns.resolve(number_record_name(to_number), "CNAME",
                              after_resolve)

    def deliver_message(self, from_number: str, to_number: str, body: str) -> bool:
        if to_number not in self.registrations:
            return False
        entry = {"at": self.host.now(), "from": from_number, "to": to_number,
                 "body": body}
        self.message_log.append(entry)
        self.host.log_event("msg_delivered", **entry)
        return True

    def on_message(self, env: fr.UnicastEnvelope) -> None:
        msg = json.loads(env.body.decode())
        if msg["msg"] == "deliver":
            ok = self.deliver_message(msg["from"], msg["to"], msg["body"])
            reply = fr.canonical_json({"msg": "ack", "msg_id": msg["msg_id"],
                                       "ok": ok, "target": self.host.node_id})
            try:
                self.host.send_unicast(msg["reply_to"], fr.UK_MSG, reply)
            except NoRouteError:
                pass
        elif msg["msg"] == "ack":
            pend = self._pending_msgs.pop(msg["msg_id"], None)
            if pend is not None and not pend["done"]:
                pend["done"] = True
                if msg["ok"]:
                    pend["conclude"]("delivered", msg["target"], pend["conflict"])
                else:
                    pend["conclude"](OUTCOME_NOT_FOUND, None, pend["conflict"])
