"""Deterministic discrete-event core: simulated clock, links, event log.

Time is integer milliseconds and advances only while events are processed.
All randomness (frame loss) comes from one seeded RNG stream, so a given
(scenario, seed) pair always produces a byte-identical event log.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Optional

log = logging.getLogger("phoenixsen.engine")

#: Links below this bandwidth are flagged slow (drives the VoIP transcode decision).
SLOW_LINK_KBPS = 128

#: Scenario event kinds accepted by the scheduler.
EVENT_KINDS = (
    "NodeJoin",
    "NodeLeave",
    "LinkUp",
    "LinkDown",
    "DeviceAttach",
    "DeviceSend",
    "DeviceCompromise",
    "RegisterClient",
    "PlaceCall",
    "SendMessage",
    "RoamClient",
    "ShieldPair",
    "ShieldActivate",
    "QuarantineDevice",
    "ConfigApply",
    "AgentPartition",
)


class SimError(Exception):
    """Base class for simulator errors."""


class PastTimeError(SimError):
    """An event was scheduled before the current simulated time."""


class LinkDownError(SimError):
    """A frame was handed to a link that is not up."""


@dataclass
class SimClock:
    """Simulated time in milliseconds; monotonically non-decreasing."""

    now: int = 0


@dataclass
class LinkSpec:
    """One bidirectional link between two nodes.

    Serialization delay is modeled store-and-forward per direction: a frame
    occupies the sender's side of the link for ``size_bits // bandwidth_kbps``
    milliseconds, so back-to-back frames queue and arrive in send order.
    """

    a: str
    b: str
    latency_ms: int = 1
    bandwidth_kbps: int = 1000
    loss_rate: float = 0.0
    up: bool = True
    kind: str = "mesh"  # "mesh" carries all traffic; "control" only marks phase-2 reachability
    epoch: int = field(default=0, repr=False, compare=False)
    _busy_until: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError(f"link endpoints must differ: {self.a}")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")
        if self.bandwidth_kbps <= 0:
            raise ValueError("bandwidth_kbps must be > 0")
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError("loss_rate must be within [0, 1]")
        if self.kind not in ("mesh", "control"):
            raise ValueError(f"unknown link kind {self.kind!r}")

    @property
    def slow(self) -> bool:
        return self.bandwidth_kbps < SLOW_LINK_KBPS

    def key(self) -> tuple[str, str]:
        return tuple(sorted((self.a, self.b)))  # type: ignore[return-value]

    def other(self, node_id: str) -> str:
        if node_id == self.a:
            return self.b
        if node_id == self.b:
            return self.a
        raise ValueError(f"{node_id} is not an endpoint of {self.key()}")

    def set_up(self, up: bool) -> None:
        if self.up and not up:
            self.epoch += 1  # in-flight frames on this link are lost
            self._busy_until.clear()
        self.up = up


@dataclass
class ScenarioEvent:
    """A scripted event: what happens, when, with kind-specific payload."""

    at: int
    kind: str
    payload: dict

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


class EventLog:
    """Append-only run log; exports as newline-delimited JSON."""

    def __init__(self) -> None:
        self.records: list[dict] = []

    def append(self, t: int, seq: int, kind: str, **fields: Any) -> dict:
        rec = {"t": t, "seq": seq, "kind": kind}
        rec.update(fields)
        self.records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[dict]:
        return iter(self.records)

    def by_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]

    def to_ndjson(self) -> str:
        return "\n".join(json.dumps(r, sort_keys=True) for r in self.records) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_ndjson().encode()).hexdigest()


class Scheduled:
    """Handle for a scheduled callback; cancel() makes it a no-op."""

    __slots__ = ("at", "seq", "fn", "cancelled")

    def __init__(self, at: int, seq: int, fn: Callable[[], None]):
        self.at = at
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Simulator:
    """Single-threaded discrete-event loop.

    The network layer registers ``deliver_cb(receiver, frame, link) -> bool``
    to receive frames and ``event_executor(event)`` to run scenario events.
    Ties at the same millisecond break by insertion sequence (FIFO).
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.clock = SimClock()
        self.rng = random.Random(seed)
        self.log = EventLog()
        self._heap: list[tuple[int, int, Scheduled]] = []
        self._seq = 0
        self._event_ids = 0
        self._tx_ids = 0
        self.deliver_cb: Optional[Callable[[str, Any, LinkSpec], bool]] = None
        self.event_executor: Optional[Callable[[ScenarioEvent], None]] = None

    # -- scheduling ---------------------------------------------------------

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def call_at(self, at: int, fn: Callable[[], None]) -> Scheduled:
        """Schedule an internal callback (timers, continuations)."""
        if at < self.clock.now:
            raise PastTimeError(f"cannot schedule at {at} < now {self.clock.now}")
        handle = Scheduled(at, self.next_seq(), fn)
        heapq.heappush(self._heap, (at, handle.seq, handle))
        return handle

    def schedule(self, event: ScenarioEvent) -> int:
        """Enqueue a scenario event; returns its stable id."""
        if event.at < self.clock.now:
            raise PastTimeError(
                f"event {event.kind} at {event.at} is before now {self.clock.now}"
            )
        event_id = self._event_ids
        self._event_ids += 1

        def _run() -> None:
            self.log.append(
                self.clock.now,
                self.next_seq(),
                "scenario_event",
                event_id=event_id,
                event=event.kind,
                payload=event.payload,
            )
            if self.event_executor is not None:
                self.event_executor(event)

        self.call_at(event.at, _run)
        return event_id

    @property
    def pending(self) -> int:
        return sum(1 for _, _, h in self._heap if not h.cancelled)

    # -- execution ----------------------------------------------------------

    def run_until(self, t: int) -> EventLog:
        """Process every event with at <= t in order; leaves clock at t."""
        if t < self.clock.now:
            raise PastTimeError(f"cannot run backwards to {t}")
        while self._heap and self._heap[0][0] <= t:
            at, _, handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self.clock.now = at
            handle.fn()
        self.clock.now = t
        return self.log

    def step(self) -> bool:
        """Process the single next pending event; False when queue is empty."""
        while self._heap:
            at, _, handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self.clock.now = at
            handle.fn()
            return True
        return False

    def next_event_at(self) -> Optional[int]:
        while self._heap and self._heap[0][2].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    # -- transmission -------------------------------------------------------

    def transmit(self, frame: Any, link: LinkSpec, sender: str) -> int:
        """Put a frame on a link; schedules delivery or a logged drop.

        Delivery lands at ``start + serialization + latency`` where start
        accounts for frames already occupying the sender side of the link.
        Loss is one Bernoulli draw per frame from the global RNG stream.
        """
        if not link.up:
            raise LinkDownError(f"link {link.key()} is down")
        receiver = link.other(sender)
        now = self.clock.now
        size = frame.wire_size()
        ser = (size * 8) // link.bandwidth_kbps
        start = max(now, link._busy_until.get(sender, 0))
        link._busy_until[sender] = start + ser
        arrive = start + ser + link.latency_ms
        tx_id = self._tx_ids
        self._tx_ids += 1
        self.log.append(
            now,
            self.next_seq(),
            "frame_sent",
            tx=tx_id,
            link=list(link.key()),
            src=sender,
            dst=receiver,
            size=size,
            latency_ms=link.latency_ms,
            arrive_at=arrive,
            frame=frame.describe(),
        )
        lost = link.loss_rate > 0.0 and self.rng.random() < link.loss_rate
        epoch = link.epoch

        def _arrive() -> None:
            t = self.clock.now
            if not link.up or link.epoch != epoch:
                self.log.append(t, self.next_seq(), "frame_dropped", tx=tx_id,
                                reason="link_down", src=sender, dst=receiver)
                return
            if lost:
                self.log.append(t, self.next_seq(), "frame_dropped", tx=tx_id,
                                reason="loss", src=sender, dst=receiver)
                return
            accepted = self.deliver_cb is not None and self.deliver_cb(receiver, frame, link)
            if accepted:
                self.log.append(t, self.next_seq(), "frame_delivered", tx=tx_id,
                                src=sender, dst=receiver, latency=t - now,
                                frame=frame.describe())
            else:
                self.log.append(t, self.next_seq(), "frame_dropped", tx=tx_id,
                                reason="node_down", src=sender, dst=receiver)

        self.call_at(arrive, _arrive)
        return tx_id
