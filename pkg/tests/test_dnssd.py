"""Masterless DNS: replication, timing, aging, conflicts, discovery."""
from __future__ import annotations

import pytest

from phoenixsen import frames as fr
from phoenixsen.dnssd import (
    DEFAULT_TIMEOUT_MS,
    PUBLISH_INTERVAL_MS,
    REPLICA_HOLD_MS,
    DnsService,
    DuplicateNameError,
    ResourceRecord,
    normalize_name,
    reverse_name,
)
from phoenixsen.engine import ScenarioEvent, Simulator
from phoenixsen.network import Network

HOP_MS = 5


class Bus:
    """Hosts exchanging DNS traffic over a shared clock with fixed hop delays."""

    def __init__(self):
        self.sim = Simulator(seed=1)
        self.hosts = []

    def host(self, node_id, delay=HOP_MS):
        h = Host(node_id, self, delay)
        self.hosts.append(h)
        return h

    def run_until(self, t):
        self.sim.run_until(t)


class Host:
    """Just enough of the node facade for a DnsService to live on."""

    def __init__(self, node_id, bus, delay):
        self.node_id = node_id
        self.bus = bus
        self.delay = delay
        self.dns = DnsService(self)
        self.records = []
        self.published = 0

    def now(self):
        return self.bus.sim.clock.now

    def call_at(self, at, fn):
        return self.bus.sim.call_at(at, fn)

    def log_event(self, kind, **fields):
        self.records.append((self.now(), kind, fields))

    def originate_multicast(self, kind, body):
        if kind == fr.MK_DNS_PUBLISH:
            self.published += 1
        for peer in self.bus.hosts:
            if peer is self:
                continue
            when = self.now() + self.delay

            def rx(p=peer, k=kind, b=body):
                if k == fr.MK_DNS_PUBLISH:
                    p.dns.on_publish(self.node_id, b)
                else:
                    p.dns.on_query(self.node_id, b)

            self.bus.sim.call_at(when, rx)

    def send_unicast(self, dst, kind, body):
        peer = next(p for p in self.bus.hosts if p.node_id == dst)
        env = fr.UnicastEnvelope(self.node_id, 0, dst, kind, body)
        self.bus.sim.call_at(self.now() + self.delay,
                             lambda: peer.dns.on_answer(env))


def rec(name, rrtype, rdata, origin, ttl=3600):
    return ResourceRecord(name, rrtype, ttl, rdata, origin)


# -- record forms -----------------------------------------------------------


def test_canonical_record_forms():
    a = rec("WS1.phxnet.org.", "A", "10.0.4.9", "phx1")
    assert a.name == "ws1.phxnet.org"
    assert a.canonical() == "ws1.phxnet.org. IN A 10.0.4.9"
    cname = rec("4822._voip.phxnet.org", "CNAME", "voip-phx23.phxnet.org", "phx23")
    assert cname.canonical() == (
        "4822._voip.phxnet.org. IN CNAME voip-phx23.phxnet.org.")
    srv = rec("plc._scada._tcp.phxnet.org", "SRV", "10 0 20000 phx1.phxnet.org",
              "phx1")
    assert srv.canonical() == (
        "plc._scada._tcp.phxnet.org. IN SRV 10 0 20000 phx1.phxnet.org.")
    ptr = rec(reverse_name("10.0.4.9"), "PTR", "ws1.phxnet.org", "phx1")
    assert ptr.canonical() == "9.4.0.10.in-addr.arpa. IN PTR ws1.phxnet.org."


def test_zone_line_carries_ttl_and_origin():
    line = rec("a.phxnet.org", "A", "10.255.0.1", "a").zone_line()
    assert line == "a.phxnet.org. 3600 IN A 10.255.0.1 ; origin=a"


def test_unsupported_rrtype_rejected():
    with pytest.raises(ValueError):
        rec("x.phxnet.org", "AAAA", "::1", "a")


def test_name_normalization():
    assert normalize_name("Mixed.PHXNET.org.") == "mixed.phxnet.org"
    assert reverse_name("10.255.3.1") == "1.3.255.10.in-addr.arpa"


# -- resolution timing --------------------------------------------------------


def test_local_hit_resolves_with_zero_latency():
    bus = Bus()
    a = bus.host("a")
    a.dns.register(rec("svc.phxnet.org", "TXT", "ready", "a"))
    got = []
    a.dns.resolve("svc.phxnet.org", "TXT", got.append)
    assert len(got) == 1
    res = got[0]
    assert res.latency == 0
    assert not res.negative
    assert res.sources == frozenset({"a"})
    assert [r.rdata for r in res.records] == ["ready"]


def test_negative_result_takes_exactly_the_timeout():
    bus = Bus()
    a = bus.host("a")
    bus.host("b")
    got = []
    a.dns.resolve("nothing.phxnet.org", "A", got.append)
    bus.run_until(DEFAULT_TIMEOUT_MS - 1)
    assert got == []
    bus.run_until(DEFAULT_TIMEOUT_MS + 1)
    assert len(got) == 1
    assert got[0].negative
    assert got[0].latency == DEFAULT_TIMEOUT_MS == 3000
    assert got[0].records == ()
    [(at, kind, fields)] = [r for r in a.records if r[1] == "dns_negative"]
    assert at == DEFAULT_TIMEOUT_MS
    assert fields == {"name": "nothing.phxnet.org", "rrtype": "A",
                      "latency": 3000}


def test_negative_honours_custom_timeout():
    bus = Bus()
    a = bus.host("a")
    got = []
    a.dns.resolve("nothing.phxnet.org", "A", got.append, timeout_ms=500)
    bus.run_until(600)
    assert got[0].negative and got[0].latency == 500


def test_remote_answers_merge_on_first_answering_tick():
    # b and c both know the name; both answers land on the same tick and the
    # query completes once with the union.
    bus = Bus()
    a = bus.host("a")
    b = bus.host("b")
    c = bus.host("c")
    b.dns.register(rec("svc.phxnet.org", "TXT", "from-b", "b"))
    c.dns.register(rec("svc.phxnet.org", "TXT", "from-c", "c"))
    got = []
    a.dns.resolve("svc.phxnet.org", "TXT", got.append)
    bus.run_until(5000)
    assert len(got) == 1
    res = got[0]
    assert not res.negative
    assert res.latency == 2 * HOP_MS
    assert res.sources == frozenset({"b", "c"})
    assert [r.rdata for r in res.records] == ["from-b", "from-c"]


def test_answers_after_the_first_tick_are_ignored():
    bus = Bus()
    a = bus.host("a")
    b = bus.host("b", delay=HOP_MS)
    c = bus.host("c", delay=HOP_MS + 2)  # answer lands two ticks late
    b.dns.register(rec("svc.phxnet.org", "TXT", "from-b", "b"))
    c.dns.register(rec("svc.phxnet.org", "TXT", "from-c", "c"))
    got = []
    a.dns.resolve("svc.phxnet.org", "TXT", got.append)
    bus.run_until(5000)
    assert len(got) == 1
    assert got[0].sources == frozenset({"b"})
    assert [r.rdata for r in got[0].records] == ["from-b"]


# -- publication and replicas --------------------------------------------------


def test_registrations_coalesce_into_one_publication():
    bus = Bus()
    a = bus.host("a")
    bus.host("b")
    a.dns.start()  # forced publication of the empty zone
    bus.run_until(1000)
    assert a.published == 1
    a.dns.register(rec("one.phxnet.org", "A", "10.0.0.1", "a"))
    a.dns.register(rec("two.phxnet.org", "A", "10.0.0.2", "a"))
    a.dns.register(rec("one.phxnet.org", "TXT", "x", "a"))
    bus.run_until(2000)
    assert a.published == 2


def test_unchanged_zone_still_refreshes_on_interval():
    bus = Bus()
    a = bus.host("a")
    bus.host("b")
    a.dns.start()
    bus.run_until(3 * PUBLISH_INTERVAL_MS + 1000)
    assert a.published == 4  # boot + three interval refreshes


def test_publication_replaces_the_origin_replica_set():
    bus = Bus()
    a = bus.host("a")
    b = bus.host("b")
    a.dns.start()
    a.dns.register(rec("one.phxnet.org", "A", "10.0.0.1", "a"))
    a.dns.register(rec("two.phxnet.org", "A", "10.0.0.2", "a"))
    bus.run_until(1000)
    assert len(b.dns.lookup_local("one.phxnet.org", "A")) == 1
    assert len(b.dns.lookup_local("two.phxnet.org", "A")) == 1
    assert a.dns.withdraw("two.phxnet.org") == 1
    bus.run_until(2000)
    assert b.dns.lookup_local("one.phxnet.org", "A") != []
    assert b.dns.lookup_local("two.phxnet.org", "A") == []


def test_replicas_age_out_after_the_hold_when_refresh_stops():
    bus = Bus()
    a = bus.host("a")
    b = bus.host("b")
    a.dns.start()
    a.dns.register(rec("one.phxnet.org", "A", "10.0.0.1", "a"))
    bus.run_until(100)
    a.dns.stop()  # no further refresh publications
    received = 0 + HOP_MS  # flush happened on the registration tick
    bus.run_until(received + REPLICA_HOLD_MS - 1)
    assert b.dns.lookup_local("one.phxnet.org", "A") != []
    bus.run_until(received + REPLICA_HOLD_MS + 1)
    assert b.dns.lookup_local("one.phxnet.org", "A") == []


def test_replica_hold_is_capped_by_the_record_ttl():
    bus = Bus()
    a = bus.host("a")
    b = bus.host("b")
    a.dns.start()
    a.dns.register(rec("blip.phxnet.org", "TXT", "x", "a", ttl=5))
    bus.run_until(100)
    a.dns.stop()
    bus.run_until(HOP_MS + 5000 - 1)
    assert b.dns.lookup_local("blip.phxnet.org", "TXT") != []
    bus.run_until(HOP_MS + 5000 + 1)
    assert b.dns.lookup_local("blip.phxnet.org", "TXT") == []


def test_leased_registration_expires_locally():
    bus = Bus()
    a = bus.host("a")
    a.dns.register(rec("tmp.phxnet.org", "TXT", "x", "a"), lease_ms=1000)
    bus.run_until(999)
    assert a.dns.lookup_local("tmp.phxnet.org", "TXT") != []
    bus.run_until(1001)
    assert a.dns.lookup_local("tmp.phxnet.org", "TXT") == []


# -- whole-network behaviour ---------------------------------------------------


def triangle():
    net = Network(seed=7)
    for n in ("a", "b", "c"):
        net.add_node(n)
    net.add_link("a", "b", latency_ms=1, bandwidth_kbps=1000)
    net.add_link("b", "c", latency_ms=1, bandwidth_kbps=1000)
    net.boot_all()
    # Routing converges within a few seconds; the first reachable zone
    # publications go out on the 10 s refresh tick.
    net.run_until(15_000)
    return net


def test_every_node_holds_the_same_zone():
    net = triangle()
    dumps = {n: net.nodes[n].dns.zone_dump() for n in ("a", "b", "c")}
    assert dumps["a"] == dumps["b"] == dumps["c"]
    assert "a.phxnet.org. 3600 IN A 10.255.0.1 ; origin=a" in dumps["b"]
    assert ("1.0.255.10.in-addr.arpa. 3600 IN PTR a.phxnet.org. ; origin=a"
            in dumps["c"])


def test_resolution_is_identical_and_local_from_every_node():
    net = triangle()
    answers = {}
    for n in ("a", "b", "c"):
        got = []
        net.nodes[n].dns.resolve("c.phxnet.org", "A", got.append)
        assert got[0].latency == 0
        answers[n] = tuple(r.canonical() for r in got[0].records)
    assert answers["a"] == answers["b"] == answers["c"]
    assert answers["a"] == ("c.phxnet.org. IN A 10.255.2.1",)


def test_departed_node_records_age_out_but_others_survive():
    net = triangle()
    net.schedule(ScenarioEvent(21_000, "NodeLeave", {"node": "c"}))
    # c's last publication (20 s tick) keeps its replicas alive for one hold.
    net.run_until(21_000 + REPLICA_HOLD_MS + 2_000)
    a = net.nodes["a"].dns
    assert a.lookup_local("c.phxnet.org", "A") == []
    assert a.lookup_local("b.phxnet.org", "A") != []
    got = []
    a.resolve("c.phxnet.org", "A", got.append)
    net.run_until(net.sim.clock.now + DEFAULT_TIMEOUT_MS + 100)
    assert got[0].negative
    assert got[0].latency == 3000


def test_foreign_hostname_claim_is_rejected():
    net = triangle()
    with pytest.raises(DuplicateNameError):
        net.nodes["b"].dns.assign_hostname("a", "10.255.1.99")


def test_service_discovery_walks_ptr_then_srv():
    net = triangle()
    b, c = net.nodes["b"].dns, net.nodes["c"].dns
    b.register(rec("_scada._tcp.phxnet.org", "PTR",
                   "plc-b._scada._tcp.phxnet.org", "b"))
    b.register(rec("plc-b._scada._tcp.phxnet.org", "SRV",
                   "10 0 20000 b.phxnet.org", "b"))
    c.register(rec("_scada._tcp.phxnet.org", "PTR",
                   "plc-c._scada._tcp.phxnet.org", "c"))
    c.register(rec("plc-c._scada._tcp.phxnet.org", "SRV",
                   "5 0 20001 c.phxnet.org", "c"))
    net.run_until(30_000)  # both publications replicated everywhere
    got = []
    net.nodes["a"].dns.discover_service("_scada._tcp", got.append)
    assert got == [[("c.phxnet.org", 20001, 5), ("b.phxnet.org", 20000, 10)]]
