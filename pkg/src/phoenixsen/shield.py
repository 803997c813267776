"""Bump-in-the-wire frame filter guarding a trusted LAN device.

A shield sits between one protected device and the substation LAN. After
out-of-band pairing with its nearest node it can be switched from Open
(byte-transparent) into a secure mode where frames from the device are
transparently augmented with an authentication tag and frames toward the
device must carry a valid tag (or satisfy the LAN-admission policy).

Tagging uses one strictly monotonic sequence counter per sender (shield
and node each own a transmit stream and track the peer's high-water mark),
so a replayed frame is rejected without any windowing; the link layer
below delivers in order. The MAC is HMAC-SHA256 over the inner frame
bytes concatenated with the 8-byte big-endian sequence; the primitive is
pluggable, only the interface is fixed.

Mode/policy changes travel as a 51-byte authenticated control frame
(kind, origin, sequence, mode, policy, MAC) built with the pairing key;
a forged frame leaves the shield state untouched.

`filter_frame` is a deterministic transition function of (shield state,
frame); its only side effects are the counter advances that implement
replay protection.
"""
from __future__ import annotations

import hashlib
import hmac
import logging
from dataclasses import dataclass
from typing import Optional

from . import frames as fr

log = logging.getLogger("phoenixsen.shield")

MODE_OPEN = "Open"
MODE_8021X = "Secure8021X"
MODE_IPSEC = "SecureIpsec"
MODES = (MODE_OPEN, MODE_8021X, MODE_IPSEC)
SECURE_MODES = (MODE_8021X, MODE_IPSEC)

POLICY_AUTH_ONLY = "AuthenticatedOnly"
POLICY_ALLOW_LAN = "AllowUnshieldedLan"
POLICIES = (POLICY_AUTH_ONLY, POLICY_ALLOW_LAN)

PASS = "pass"
PASS_AUGMENTED = "pass_augmented"
DROP = "drop"
DIVERTED = "diverted"

REASON_BAD_MAC = "BadMac"
REASON_REPLAY = "Replay"
REASON_UNAUTH = "Unauthenticated"

CTRL_ACTIVATE = 0x10
CTRL_DEACTIVATE = 0x11
CONTROL_LEN = 1 + 8 + 8 + 1 + 1 + 32

AUTH_EXCHANGE_FRAMES = 4

_MODE_CODES = {MODE_OPEN: 0, MODE_8021X: 1, MODE_IPSEC: 2}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}
_POLICY_CODES = {POLICY_AUTH_ONLY: 0, POLICY_ALLOW_LAN: 1}
_POLICY_NAMES = {v: k for k, v in _POLICY_CODES.items()}


class NotPairedError(Exception):
    pass


class AlreadyPairedError(Exception):
    pass


class BadControlAuthError(Exception):
    pass


def derive_key(shield_id: str, node_id: str) -> bytes:
    """Deterministic stand-in for the out-of-band key exchange; 256 bits."""
    return hashlib.sha256(
        b"ethershield/" + shield_id.encode() + b"/" + node_id.encode()).digest()


def compute_mac(key: bytes, inner_bytes: bytes, sequence: int) -> bytes:
    return hmac.new(key, inner_bytes + sequence.to_bytes(8, "big"),
                    hashlib.sha256).digest()


class TagChannel:
    """One end of the authenticated channel: own transmit counter plus the
    peer's receive high-water mark (separate streams per direction)."""

    def __init__(self, key: bytes) -> None:
        if len(key) != 32:
            raise ValueError("key must be 256 bits")
        self.key = key
        self.tx_seq = 0
        self.rx_high = 0

    def make_tag(self, shield_id: str, inner_bytes: bytes) -> fr.AuthTag:
        self.tx_seq += 1
        return fr.AuthTag(shield_id, self.tx_seq,
                          compute_mac(self.key, inner_bytes, self.tx_seq))

    def verify(self, inner_bytes: bytes, tag: fr.AuthTag) -> Optional[str]:
        """None if the tag admits the frame, else a drop reason."""
        want = compute_mac(self.key, inner_bytes, tag.sequence)
        if not hmac.compare_digest(want, tag.mac):
            return REASON_BAD_MAC
        if tag.sequence <= self.rx_high:
            return REASON_REPLAY
        self.rx_high = tag.sequence
        return None


@dataclass(frozen=True)
class FilterOutcome:
    kind: str                       # pass | pass_augmented | drop | diverted
    frame: Optional[fr.LanFrame]    # frame to forward (None when dropped)
    reason: Optional[str] = None    # BadMac | Replay | Unauthenticated
    tag: Optional[fr.AuthTag] = None


def encode_control(kind: int, origin: str, sequence: int, mode: str,
                   policy: str, key: bytes) -> bytes:
    head = bytes([kind]) + fr.pad_id(origin) + sequence.to_bytes(8, "big") \
        + bytes([_MODE_CODES[mode], _POLICY_CODES[policy]])
    return head + hmac.new(key, head, hashlib.sha256).digest()


class ShieldDevice:
    """Filter state machine for one protected device."""

    def __init__(self, shield_id: str, protected_device: str) -> None:
        self.id = shield_id
        self.protected_device = protected_device
        self.paired_node: Optional[str] = None
        self.channel: Optional[TagChannel] = None
        self.mode = MODE_OPEN
        self.policy = POLICY_AUTH_ONLY
        self.auth_exchange_count = 0
        self.device_authorized = False

    @property
    def key(self) -> Optional[bytes]:
        return self.channel.key if self.channel is not None else None

    @property
    def secure(self) -> bool:
        return self.mode in SECURE_MODES

    def pair(self, node_id: str, key: bytes) -> None:
        if self.paired_node is not None:
            raise AlreadyPairedError(f"shield {self.id} already paired "
                                     f"with {self.paired_node}")
        self.paired_node = node_id
        self.channel = TagChannel(key)

    def activate(self, mode: str, policy: str) -> None:
        if self.paired_node is None:
            raise NotPairedError(f"shield {self.id} is not paired")
        if mode not in MODES or policy not in POLICIES:
            raise ValueError(f"unknown mode/policy {mode!r}/{policy!r}")
        self.mode = mode
        self.policy = policy
        if mode != MODE_8021X:
            self.auth_exchange_count = 0
            self.device_authorized = False

    def handle_control(self, data: bytes) -> tuple[str, str]:
        """Apply an authenticated activate/deactivate frame from the LAN."""
        if self.paired_node is None:
            raise NotPairedError(f"shield {self.id} is not paired")
        if len(data) != CONTROL_LEN or data[0] not in (CTRL_ACTIVATE,
                                                       CTRL_DEACTIVATE):
            raise BadControlAuthError("malformed control frame")
        head, mac = data[:CONTROL_LEN - 32], data[CONTROL_LEN - 32:]
        want = hmac.new(self.channel.key, head, hashlib.sha256).digest()
        if not hmac.compare_digest(want, mac):
            raise BadControlAuthError("control frame MAC mismatch")
        origin = fr.unpad_id(data[1:9])
        if origin != self.paired_node:
            raise BadControlAuthError(f"control frame origin {origin} is not "
                                      f"the paired node")
        seq = int.from_bytes(data[9:17], "big")
        if seq <= self.channel.rx_high:
            raise BadControlAuthError("control frame sequence replayed")
        self.channel.rx_high = seq
        if data[0] == CTRL_DEACTIVATE:
            self.activate(MODE_OPEN, self.policy)
        else:
            self.activate(_MODE_NAMES[data[17]], _POLICY_NAMES[data[18]])
        return self.mode, self.policy

    def filter_frame(self, frame: fr.LanFrame, direction: str) -> FilterOutcome:
        if direction not in ("to_device", "from_device"):
            raise ValueError(f"unknown direction {direction!r}")
        if self.mode == MODE_OPEN:
            return FilterOutcome(PASS, frame)
        if self.mode == MODE_8021X and frame.eapol:
            self.auth_exchange_count += 1
            if self.auth_exchange_count >= AUTH_EXCHANGE_FRAMES:
                self.device_authorized = True
            return FilterOutcome(DIVERTED, None)
        inner_bytes = frame.inner.encode()
        if direction == "from_device":
            tag = self.channel.make_tag(self.id, inner_bytes)
            return FilterOutcome(
                PASS_AUGMENTED,
                fr.LanFrame(frame.inner, tag=tag, eapol=frame.eapol,
                            local_src=frame.local_src),
                tag=tag)
        if frame.tag is not None:
            reason = self.channel.verify(inner_bytes, frame.tag)
            if reason is not None:
                return FilterOutcome(DROP, None, reason=reason)
            return FilterOutcome(
                PASS, fr.LanFrame(frame.inner, tag=None, eapol=frame.eapol,
                                  local_src=frame.local_src))
        if self.policy == POLICY_ALLOW_LAN and frame.local_src:
            return FilterOutcome(PASS, frame)
        return FilterOutcome(DROP, None, reason=REASON_UNAUTH)


class CredentialStore:
    """Node-side shield credentials: one channel per paired shield."""

    def __init__(self, node_id: str) -> None:
        self.node_id = node_id
        self.channels: dict[str, TagChannel] = {}
        self.shields: dict[str, str] = {}   # shield id -> protected device

    def pair(self, shield: ShieldDevice) -> None:
        if shield.id in self.channels:
            raise AlreadyPairedError(f"node {self.node_id} already holds "
                                     f"credentials for {shield.id}")
        key = derive_key(shield.id, self.node_id)
        shield.pair(self.node_id, key)
        self.channels[shield.id] = TagChannel(key)
        self.shields[shield.id] = shield.protected_device

    def activation_frame(self, shield_id: str, mode: str, policy: str) -> bytes:
        # Control frames share the node->shield sequence stream with data
        # tags, so one high-water mark on the shield covers both.
        channel = self._channel(shield_id)
        channel.tx_seq += 1
        kind = CTRL_DEACTIVATE if mode == MODE_OPEN else CTRL_ACTIVATE
        return encode_control(kind, self.node_id, channel.tx_seq, mode,
                              policy, channel.key)

    def tag_for(self, shield_id: str, inner_bytes: bytes) -> fr.AuthTag:
        channel = self._channel(shield_id)
        channel.tx_seq += 1
        return fr.AuthTag(shield_id, channel.tx_seq,
                          compute_mac(channel.key, inner_bytes,
                                      channel.tx_seq))

    def verify(self, inner_bytes: bytes, tag: fr.AuthTag) -> Optional[str]:
        channel = self.channels.get(tag.shield_id)
        if channel is None:
            return REASON_BAD_MAC
        return channel.verify(inner_bytes, tag)

    def shield_for_device(self, device_id: str) -> Optional[str]:
        for sid, dev in self.shields.items():
            if dev == device_id:
                return sid
        return None

    def _channel(self, shield_id: str) -> TagChannel:
        channel = self.channels.get(shield_id)
        if channel is None:
            raise NotPairedError(f"node {self.node_id} holds no credentials "
                                 f"for shield {shield_id}")
        return channel

    def dump(self) -> str:
        lines = []
        for sid in sorted(self.channels):
            ch = self.channels[sid]
            lines.append(f"shield={sid} device={self.shields[sid]} "
                         f"key={ch.key.hex()} tx={ch.tx_seq} rx={ch.rx_high}")
        return "\n".join(lines) + ("\n" if lines else "")
