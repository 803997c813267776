"""Frame types and their binary codecs.

Two wire families cross mesh links:

* **Control frames** (hello, topology, multicast, unicast envelope) share a
  compact header: 1-byte type, 8-byte NUL-padded origin node id, 4-byte
  big-endian sequence number, then a type-specific payload.
* **Overlay frames** carry tenant traffic: 3-byte big-endian VNI, 8+8-byte
  src/dst node ids, 2-byte inner length, then the encoded inner frame.
  Their modeled wire size is ``inner.size + 50`` — a flat allowance for the
  full encapsulation stack — independent of the codec byte count.

Layouts are frozen; see docs/wire-formats.md for the normative tables.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

# Control frame type codes.
T_HELLO = 1
T_TOPOLOGY = 2
T_MCAST = 3
T_UNICAST = 4

# Multicast inner payload kinds.
MK_DNS_PUBLISH = 1
MK_DNS_QUERY = 2

# Unicast envelope payload kinds.
UK_DNS_ANSWER = 1
UK_NETMON = 2
UK_SIP = 3
UK_MSG = 4

#: Modeled encapsulation overhead added to an inner frame (bytes).
OVERLAY_OVERHEAD = 50

#: Default hop budget for routed frames.
DEFAULT_TTL = 32

SUBSTATION_NONE = 0xFFFF


class CodecError(ValueError):
    """Raised when bytes cannot be decoded as the expected frame."""


def pad_id(node_id: str) -> bytes:
    raw = node_id.encode("ascii")
    if not 0 < len(raw) <= 8:
        raise CodecError(f"node id must be 1..8 ASCII bytes: {node_id!r}")
    return raw.ljust(8, b"\x00")


def unpad_id(raw: bytes) -> str:
    try:
        return raw.rstrip(b"\x00").decode("ascii")
    except UnicodeDecodeError as exc:
        raise CodecError(f"node id is not ASCII: {raw!r}") from exc


def _ascii(raw: bytes, what: str) -> str:
    try:
        return raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise CodecError(f"{what} is not ASCII: {raw!r}") from exc


def canonical_json(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _header(ftype: int, origin: str, seq: int) -> bytes:
    return struct.pack(">B8sI", ftype, pad_id(origin), seq)


def _split_header(data: bytes) -> tuple[int, str, int, bytes]:
    if len(data) < 13:
        raise CodecError(f"frame too short: {len(data)} bytes")
    ftype, origin, seq = struct.unpack(">B8sI", data[:13])
    return ftype, unpad_id(origin), seq, data[13:]


@dataclass(frozen=True)
class HelloFrame:
    """One-hop neighbor beacon, sent per interface on a fixed cadence."""

    origin: str
    seq: int
    interface: int = 0

    def encode(self) -> bytes:
        return _header(T_HELLO, self.origin, self.seq) + struct.pack(">B", self.interface)

    def wire_size(self) -> int:
        return len(self.encode())

    def describe(self) -> dict:
        return {"type": "hello", "origin": self.origin, "seq": self.seq}


@dataclass(frozen=True)
class TopologyFrame:
    """Link-state advertisement: who the origin is and who it can hear."""

    origin: str
    seq: int
    utility: Optional[str] = None
    substation: Optional[int] = None
    neighbors: tuple[str, ...] = ()

    def encode(self) -> bytes:
        util = (self.utility or "").encode("ascii")
        if len(util) > 255:
            raise CodecError("utility name too long")
        sub = SUBSTATION_NONE if self.substation is None else self.substation
        out = _header(T_TOPOLOGY, self.origin, self.seq)
        out += struct.pack(">B", len(util)) + util
        out += struct.pack(">HB", sub, len(self.neighbors))
        for n in self.neighbors:
            out += pad_id(n)
        return out

    def wire_size(self) -> int:
        return len(self.encode())

    def describe(self) -> dict:
        return {"type": "topology", "origin": self.origin, "seq": self.seq,
                "neighbors": list(self.neighbors)}


@dataclass(frozen=True)
class MulticastFrame:
    """Flooded control payload; (origin, seq) is the duplicate-suppression key."""

    origin: str
    seq: int
    inner_kind: int
    body: bytes

    def encode(self) -> bytes:
        return (_header(T_MCAST, self.origin, self.seq)
                + struct.pack(">BH", self.inner_kind, len(self.body)) + self.body)

    def wire_size(self) -> int:
        return len(self.encode())

    def dedup_key(self) -> tuple[str, int]:
        return (self.origin, self.seq)

    def body_json(self) -> dict:
        return json.loads(self.body.decode())

    def describe(self) -> dict:
        return {"type": "mcast", "origin": self.origin, "seq": self.seq,
                "inner_kind": self.inner_kind}


@dataclass(frozen=True)
class UnicastEnvelope:
    """Hop-by-hop routed control message (answers, samples, signaling)."""

    origin: str
    seq: int
    dst: str
    kind: int
    body: bytes
    ttl: int = DEFAULT_TTL

    def encode(self) -> bytes:
        return (_header(T_UNICAST, self.origin, self.seq)
                + pad_id(self.dst)
                + struct.pack(">BBH", self.ttl, self.kind, len(self.body))
                + self.body)

    def wire_size(self) -> int:
        return len(self.encode())

    def body_json(self) -> dict:
        return json.loads(self.body.decode())

    def hop(self) -> "UnicastEnvelope":
        return UnicastEnvelope(self.origin, self.seq, self.dst, self.kind,
                               self.body, self.ttl - 1)

    def describe(self) -> dict:
        return {"type": "unicast", "origin": self.origin, "seq": self.seq,
                "dst": self.dst, "unicast_kind": self.kind, "ttl": self.ttl}


def decode_control(data: bytes):
    """Decode a control frame from bytes; inverse of each encode()."""
    ftype, origin, seq, rest = _split_header(data)
    if ftype == T_HELLO:
        if len(rest) != 1:
            raise CodecError("hello payload must be 1 byte")
        return HelloFrame(origin, seq, rest[0])
    if ftype == T_TOPOLOGY:
        if len(rest) < 1:
            raise CodecError("truncated topology frame")
        ulen = rest[0]
        if len(rest) < 1 + ulen + 3:
            raise CodecError("truncated topology frame")
        utility = _ascii(rest[1:1 + ulen], "utility") or None
        sub, count = struct.unpack(">HB", rest[1 + ulen:1 + ulen + 3])
        off = 1 + ulen + 3
        if len(rest) != off + 8 * count:
            raise CodecError("topology neighbor list length mismatch")
        neighbors = tuple(unpad_id(rest[off + 8 * i:off + 8 * (i + 1)])
                          for i in range(count))
        return TopologyFrame(origin, seq,
                             utility, None if sub == SUBSTATION_NONE else sub,
                             neighbors)
    if ftype == T_MCAST:
        if len(rest) < 3:
            raise CodecError("truncated multicast frame")
        inner_kind, blen = struct.unpack(">BH", rest[:3])
        if len(rest) != 3 + blen:
            raise CodecError("multicast body length mismatch")
        return MulticastFrame(origin, seq, inner_kind, rest[3:])
    if ftype == T_UNICAST:
        if len(rest) < 12:
            raise CodecError("truncated unicast frame")
        dst = unpad_id(rest[:8])
        ttl, kind, blen = struct.unpack(">BBH", rest[8:12])
        if len(rest) != 12 + blen:
            raise CodecError("unicast body length mismatch")
        return UnicastEnvelope(origin, seq, dst, kind, rest[12:], ttl)
    raise CodecError(f"unknown control frame type {ftype}")


@dataclass(frozen=True)
class InnerFrame:
    """Tenant-device frame as seen on a substation LAN.

    ``size`` is the modeled frame length in bytes and drives link timing;
    ``payload`` is short descriptive content kept for auditing.
    """

    src_device: str
    dst_device: str
    payload: bytes = b""
    size: int = 100

    def encode(self) -> bytes:
        src = self.src_device.encode("ascii")
        dst = self.dst_device.encode("ascii")
        if len(src) > 255 or len(dst) > 255:
            raise CodecError("device address too long")
        return (struct.pack(">B", len(src)) + src
                + struct.pack(">B", len(dst)) + dst
                + struct.pack(">HI", len(self.payload), self.size) + self.payload)

    @classmethod
    def decode(cls, data: bytes) -> "InnerFrame":
        if len(data) < 1:
            raise CodecError("truncated inner frame")
        slen = data[0]
        off = 1 + slen
        if len(data) < off + 1:
            raise CodecError("truncated inner frame")
        src = _ascii(data[1:off], "device address")
        dlen = data[off]
        off2 = off + 1 + dlen
        if len(data) < off2 + 6:
            raise CodecError("truncated inner frame")
        dst = _ascii(data[off + 1:off2], "device address")
        plen, size = struct.unpack(">HI", data[off2:off2 + 6])
        if len(data) != off2 + 6 + plen:
            raise CodecError("inner payload length mismatch")
        return cls(src, dst, data[off2 + 6:], size)


@dataclass(frozen=True)
class OverlayFrame:
    """VNI-tagged encapsulation of an InnerFrame between two mesh nodes.

    ``ttl`` (outer hop budget) and ``auth_src`` (set when the inner frame
    was cryptographically verified at the ingress node; read by shield
    egress) model fields of the flat 50-byte encapsulation overhead and are
    not part of the conformance byte layout. ``fid`` is a run-local frame
    id stamped at encapsulation so log records of one frame can be joined
    end-to-end; it never touches the wire.
    """

    vni: int
    src_node: str
    dst_node: str
    inner: InnerFrame
    ttl: int = DEFAULT_TTL
    auth_src: bool = False
    fid: int = 0

    def encode(self) -> bytes:
        if not 0 <= self.vni < (1 << 24):
            raise CodecError(f"vni out of range: {self.vni}")
        body = self.inner.encode()
        return (self.vni.to_bytes(3, "big") + pad_id(self.src_node)
                + pad_id(self.dst_node) + struct.pack(">H", len(body)) + body)

    @classmethod
    def decode(cls, data: bytes) -> "OverlayFrame":
        if len(data) < 21:
            raise CodecError("truncated overlay frame")
        vni = int.from_bytes(data[:3], "big")
        src = unpad_id(data[3:11])
        dst = unpad_id(data[11:19])
        (blen,) = struct.unpack(">H", data[19:21])
        if len(data) != 21 + blen:
            raise CodecError("overlay body length mismatch")
        return cls(vni, src, dst, InnerFrame.decode(data[21:]))

    def wire_size(self) -> int:
        return self.inner.size + OVERLAY_OVERHEAD

    def hop(self) -> "OverlayFrame":
        return OverlayFrame(self.vni, self.src_node, self.dst_node,
                            self.inner, self.ttl - 1, self.auth_src, self.fid)

    def describe(self) -> dict:
        return {"type": "overlay", "vni": self.vni, "src_node": self.src_node,
                "dst_node": self.dst_node, "inner_src": self.inner.src_device,
                "inner_dst": self.inner.dst_device, "inner_size": self.inner.size,
                "fid": self.fid}


@dataclass(frozen=True)
class AuthTag:
    """Authentication header a shield (or its paired node) prepends to a
    LAN frame: keyed hash over (inner frame bytes, sequence)."""

    shield_id: str
    sequence: int
    mac: bytes


@dataclass(frozen=True)
class LanFrame:
    """A frame on a substation LAN segment (device ↔ node, through a shield
    when one protects the device). Tags never cross the mesh; ``local_src``
    marks frames that originated on this node's own LAN.
    """

    inner: InnerFrame
    tag: Optional[AuthTag] = None
    eapol: bool = False
    local_src: bool = True

    def wire_size(self) -> int:
        return self.inner.size + (42 if self.tag else 0)

    def describe(self) -> dict:
        return {"type": "lan", "src": self.inner.src_device,
                "dst": self.inner.dst_device, "tagged": self.tag is not None,
                "eapol": self.eapol}
