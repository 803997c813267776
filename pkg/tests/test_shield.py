"""Shield filter: tagging vectors, replay, control frames, admission policy."""
from __future__ import annotations

import hashlib
import hmac

import pytest

from phoenixsen import frames as fr
from phoenixsen.shield import (
    AUTH_EXCHANGE_FRAMES,
    CONTROL_LEN,
    CTRL_ACTIVATE,
    CTRL_DEACTIVATE,
    AlreadyPairedError,
    BadControlAuthError,
    CredentialStore,
    NotPairedError,
    ShieldDevice,
    TagChannel,
    compute_mac,
    derive_key,
    encode_control,
)

INNER = fr.InnerFrame("plc7", "ws2", b"", 100)


def paired(policy="AuthenticatedOnly", mode="SecureIpsec"):
    shield = ShieldDevice("es1", "plc7")
    store = CredentialStore("phx1")
    store.pair(shield)
    shield.activate(mode, policy)
    return shield, store


# -- vectors (expected values computed with hashlib/hmac directly) -------------


def test_key_derivation_vector():
    key = derive_key("es1", "phx1")
    assert key == hashlib.sha256(b"ethershield/es1/phx1").digest()
    assert key.hex() == (
        "76d8424ef839233e5b3720559b05c8c84abf2558247b0cf6be3cfdc2b6254efd")


def test_mac_vector():
    key = derive_key("es1", "phx1")
    inner = INNER.encode()
    assert inner.hex() == "04706c633703777332000000000064"
    want = hmac.new(key, inner + (1).to_bytes(8, "big"),
                    hashlib.sha256).digest()
    assert compute_mac(key, inner, 1) == want
    assert want.hex() == (
        "9c777da448ba88549d9061be13e5eb105ed89e506b29128555be9092fcf2f637")


def test_control_frame_layout_is_51_bytes():
    key = derive_key("es1", "phx1")
    data = encode_control(CTRL_ACTIVATE, "phx1", 7, "Secure8021X",
                          "AuthenticatedOnly", key)
    assert CONTROL_LEN == 51 == len(data)
    assert data[0] == 0x10
    assert data[1:9] == b"phx1\x00\x00\x00\x00"
    assert int.from_bytes(data[9:17], "big") == 7
    assert data[17] == 1   # Secure8021X
    assert data[18] == 0   # AuthenticatedOnly
    head = data[:19]
    assert head.hex() == "10706878310000000000000000000000070100"
    assert data[19:] == hmac.new(key, head, hashlib.sha256).digest()
    assert data[19:].hex() == (
        "c81bb226a5726c734b9967c99dec367356cd95e5fe91f8d9e4f376d5d8fa0ddb")


# -- tag channel ---------------------------------------------------------------


def test_tag_sequence_is_strictly_monotonic():
    ch = TagChannel(derive_key("es1", "phx1"))
    inner = INNER.encode()
    t1 = ch.make_tag("es1", inner)
    t2 = ch.make_tag("es1", inner)
    assert (t1.sequence, t2.sequence) == (1, 2)
    assert t1.mac != t2.mac  # sequence is inside the MAC


def test_replay_is_rejected_without_windowing():
    key = derive_key("es1", "phx1")
    tx, rx = TagChannel(key), TagChannel(key)
    inner = INNER.encode()
    tags = [tx.make_tag("es1", inner) for _ in range(5)]
    assert rx.verify(inner, tags[1]) is None
    assert rx.verify(inner, tags[1]) == "Replay"
    assert rx.verify(inner, tags[0]) == "Replay"   # older than high-water
    assert rx.verify(inner, tags[4]) is None       # skipping ahead is fine
    assert rx.verify(inner, tags[2]) == "Replay"


def test_bad_mac_does_not_advance_the_high_water_mark():
    key = derive_key("es1", "phx1")
    tx, rx = TagChannel(key), TagChannel(key)
    inner = INNER.encode()
    tag = tx.make_tag("es1", inner)
    forged = fr.AuthTag(tag.shield_id, tag.sequence,
                        bytes([tag.mac[0] ^ 1]) + tag.mac[1:])
    assert rx.verify(inner, forged) == "BadMac"
    assert rx.verify(inner, tag) is None  # genuine frame still admitted


def test_channel_requires_a_256_bit_key():
    with pytest.raises(ValueError):
        TagChannel(b"short")


# -- pairing and control -------------------------------------------------------


def test_pairing_is_exclusive():
    shield = ShieldDevice("es1", "plc7")
    store = CredentialStore("phx1")
    store.pair(shield)
    assert shield.paired_node == "phx1"
    assert store.shield_for_device("plc7") == "es1"
    with pytest.raises(AlreadyPairedError):
        store.pair(shield)
    with pytest.raises(AlreadyPairedError):
        CredentialStore("phx2").pair(shield)


def test_activation_round_trip_through_a_control_frame():
    shield = ShieldDevice("es1", "plc7")
    store = CredentialStore("phx1")
    store.pair(shield)
    data = store.activation_frame("es1", "Secure8021X", "AllowUnshieldedLan")
    assert shield.handle_control(data) == ("Secure8021X", "AllowUnshieldedLan")
    down = store.activation_frame("es1", "Open", "AllowUnshieldedLan")
    assert down[0] == CTRL_DEACTIVATE
    assert shield.handle_control(down) == ("Open", "AllowUnshieldedLan")


def test_replayed_control_frame_is_rejected():
    shield = ShieldDevice("es1", "plc7")
    store = CredentialStore("phx1")
    store.pair(shield)
    data = store.activation_frame("es1", "SecureIpsec", "AuthenticatedOnly")
    shield.handle_control(data)
    with pytest.raises(BadControlAuthError):
        shield.handle_control(data)
    assert shield.mode == "SecureIpsec"


def test_forged_control_frame_leaves_state_untouched():
    shield = ShieldDevice("es1", "plc7")
    store = CredentialStore("phx1")
    store.pair(shield)
    data = store.activation_frame("es1", "SecureIpsec", "AuthenticatedOnly")
    forged = data[:-1] + bytes([data[-1] ^ 0xFF])
    with pytest.raises(BadControlAuthError):
        shield.handle_control(forged)
    assert shield.mode == "Open"
    with pytest.raises(BadControlAuthError):
        shield.handle_control(data[:30])  # truncated
    wrong_origin = encode_control(CTRL_ACTIVATE, "phx9", 1, "SecureIpsec",
                                  "AuthenticatedOnly", shield.key)
    with pytest.raises(BadControlAuthError):
        shield.handle_control(wrong_origin)
    assert shield.mode == "Open"


def test_unpaired_shield_accepts_nothing():
    shield = ShieldDevice("es1", "plc7")
    with pytest.raises(NotPairedError):
        shield.activate("SecureIpsec", "AuthenticatedOnly")
    with pytest.raises(NotPairedError):
        shield.handle_control(b"\x10" + bytes(50))
    with pytest.raises(NotPairedError):
        CredentialStore("phx1").activation_frame("es1", "Open",
                                                 "AuthenticatedOnly")


def test_activate_validates_mode_and_policy():
    shield = ShieldDevice("es1", "plc7")
    CredentialStore("phx1").pair(shield)
    with pytest.raises(ValueError):
        shield.activate("SecureQuantum", "AuthenticatedOnly")
    with pytest.raises(ValueError):
        shield.activate("Open", "AllowAll")


# -- filtering -----------------------------------------------------------------


def test_open_mode_is_byte_transparent():
    shield = ShieldDevice("es1", "plc7")
    frame = fr.LanFrame(INNER)
    for direction in ("to_device", "from_device"):
        out = shield.filter_frame(frame, direction)
        assert out.kind == "pass"
        assert out.frame is frame
        assert out.tag is None


def test_frames_from_the_device_are_augmented_with_a_tag():
    shield, _ = paired()
    out = shield.filter_frame(fr.LanFrame(INNER), "from_device")
    assert out.kind == "pass_augmented"
    assert out.frame.tag == out.tag
    assert out.tag.shield_id == "es1"
    assert out.tag.sequence == 1
    want = hmac.new(derive_key("es1", "phx1"),
                    INNER.encode() + (1).to_bytes(8, "big"),
                    hashlib.sha256).digest()
    assert out.tag.mac == want
    assert out.frame.wire_size() == INNER.size + 42


def test_valid_tag_admits_and_is_stripped():
    shield, store = paired()
    tag = store.tag_for("es1", INNER.encode())
    out = shield.filter_frame(fr.LanFrame(INNER, tag=tag), "to_device")
    assert out.kind == "pass"
    assert out.frame.tag is None
    replay = shield.filter_frame(fr.LanFrame(INNER, tag=tag), "to_device")
    assert replay.kind == "drop"
    assert replay.reason == "Replay"


def test_untagged_frames_fall_to_the_admission_policy():
    strict, _ = paired(policy="AuthenticatedOnly")
    out = strict.filter_frame(fr.LanFrame(INNER, local_src=True), "to_device")
    assert (out.kind, out.reason) == ("drop", "Unauthenticated")

    lan_ok, _ = paired(policy="AllowUnshieldedLan")
    local = lan_ok.filter_frame(fr.LanFrame(INNER, local_src=True),
                                "to_device")
    assert local.kind == "pass"
    remote = lan_ok.filter_frame(fr.LanFrame(INNER, local_src=False),
                                 "to_device")
    assert (remote.kind, remote.reason) == ("drop", "Unauthenticated")


def test_bad_mac_drops_the_frame():
    shield, store = paired()
    tag = store.tag_for("es1", INNER.encode())
    other = fr.InnerFrame("plc7", "ws2", b"", 101)  # size differs -> new bytes
    out = shield.filter_frame(fr.LanFrame(other, tag=tag), "to_device")
    assert (out.kind, out.reason) == ("drop", "BadMac")


def test_8021x_diverts_the_authentication_exchange():
    shield, _ = paired(mode="Secure8021X")
    assert not shield.device_authorized
    for i in range(AUTH_EXCHANGE_FRAMES):
        out = shield.filter_frame(fr.LanFrame(INNER, eapol=True),
                                  "from_device")
        assert out.kind == "diverted"
        assert out.frame is None
    assert AUTH_EXCHANGE_FRAMES == 4
    assert shield.device_authorized
    # Non-EAPoL traffic still flows tagged while the exchange runs.
    data = shield.filter_frame(fr.LanFrame(INNER), "from_device")
    assert data.kind == "pass_augmented"
    # Leaving 802.1X resets the authorization state.
    shield.activate("Open", shield.policy)
    assert not shield.device_authorized
    assert shield.auth_exchange_count == 0


def test_node_side_verification_and_dump():
    shield, store = paired()
    out = shield.filter_frame(fr.LanFrame(INNER), "from_device")
    assert store.verify(INNER.encode(), out.tag) is None
    assert store.verify(INNER.encode(), out.tag) == "Replay"
    stranger = fr.AuthTag("es9", 1, bytes(32))
    assert store.verify(INNER.encode(), stranger) == "BadMac"
    dump = store.dump()
    assert dump.startswith("shield=es1 device=plc7 key=76d8424e")
    assert dump.endswith("tx=0 rx=1\n")
