"""Whole-network container: nodes, links, and the scenario event executor.

This is the composition root of a run: it owns the simulator, builds
nodes and links, resolves overlay destinations across the address plan,
and translates scripted scenario events into node operations. Everything
here is deterministic given (scenario, seed).
"""
from __future__ import annotations

import ipaddress
import logging
from typing import Optional

from . import deployment
from . import shield as sh
from .engine import LinkSpec, ScenarioEvent, SimError, Simulator
from .node import PhoenixNode
from .routing import NoRouteError
from .voip import EnvironmentMissingError, NotRegisteredError, VoipClient

log = logging.getLogger("phoenixsen.network")


class Network:
    """All state of one simulated deployment."""

    def __init__(self, seed: int = 0) -> None:
        self.sim = Simulator(seed)
        self.sim.deliver_cb = self._deliver
        self.sim.event_executor = self._execute
        self.nodes: dict[str, PhoenixNode] = {}
        self.links: list[LinkSpec] = []
        self._incident: dict[str, list[tuple[int, LinkSpec]]] = {}
        self.model: Optional[deployment.DeploymentModel] = None
        self.library: Optional[deployment.ConfigLibrary] = None
        self.assignments: dict[tuple[str, int], str] = {}
        self.groups: dict[str, list[str]] = {}
        self._fids = 0
        self._vni_nets: dict[int, list] = {}

    # -- construction ----------------------------------------------------------

    def add_node(self, node_id: str, control_center: bool = False) -> PhoenixNode:
        if node_id in self.nodes:
            raise ValueError(f"duplicate node id {node_id}")
        node = PhoenixNode(node_id, self, len(self.nodes), control_center)
        self.nodes[node_id] = node
        self._incident.setdefault(node_id, [])
        return node

    def add_link(self, a: str, b: str, latency_ms: int = 1,
                 bandwidth_kbps: int = 1000, loss_rate: float = 0.0,
                 kind: str = "mesh", up: bool = True) -> LinkSpec:
        for endpoint in (a, b):
            if endpoint not in self.nodes:
                raise ValueError(f"unknown node {endpoint}")
        link = LinkSpec(a, b, latency_ms, bandwidth_kbps, loss_rate,
                        up=up, kind=kind)
        self.links.append(link)
        for endpoint in (a, b):
            bucket = self._incident[endpoint]
            bucket.append((len(bucket), link))
        return link

    def use_model(self, model: deployment.DeploymentModel) -> None:
        self.library = deployment.synthesize(model)
        self.model = model

    def boot_all(self) -> None:
        for node_id in sorted(self.nodes):
            self.nodes[node_id].boot()

    # -- lookups ------------------------------------------------------------------

    def links_of(self, node_id: str) -> list[tuple[int, LinkSpec]]:
        return self._incident.get(node_id, [])

    def links_between(self, a: str, b: str,
                      kind: Optional[str] = None) -> list[LinkSpec]:
        pair = tuple(sorted((a, b)))
        return [l for l in self.links if l.key() == pair
                and (kind is None or l.kind == kind)]

    def utility_spec(self, name: str) -> Optional[deployment.UtilitySpec]:
        if self.model is None:
            return None
        for u in self.model.utilities:
            if u.name == name:
                return u
        return None

    def is_control_center(self, node_id: str) -> bool:
        node = self.nodes.get(node_id)
        return node is not None and node.is_control_center

    def locate_endpoint(self, vni: int, address: str) -> Optional[str]:
        """Which node hosts the environment (by VNI) containing ``address``.

        Subnets of one VNI are disjoint across substations, so at most one
        node matches; iteration order is fixed for determinism anyway.
        """
        for node_id in sorted(self.nodes):
            env = self.nodes[node_id].env_by_vni(vni)
            if env is not None and env.contains(address):
                return node_id
        return None

    def vni_contains(self, vni: int, address: str) -> bool:
        """Whether ``address`` belongs to the VNI's whole address plan
        (any substation's subnet of that utility/VLAN, or the shared
        management space). Without a model the check degrades to accepting,
        since there is no plan to validate against."""
        if vni == 0:
            return ipaddress.ip_address(address) in ipaddress.ip_network(
                "10.255.0.0/16")
        if self.library is None:
            return True
        nets = self._vni_nets.get(vni)
        if nets is None:
            nets = [ipaddress.ip_network(tpl.subnet)
                    for cfg in self.library.configs.values()
                    for tpl in cfg.environments if tpl.vni == vni]
            self._vni_nets[vni] = nets
        addr = ipaddress.ip_address(address)
        return any(addr in net for net in nets)

    def next_fid(self) -> int:
        self._fids += 1
        return self._fids

    def plan_media_path(self, src: str, dst: str) -> bool:
        """True when the hop-by-hop unicast path crosses a slow link."""
        if src == dst:
            return False
        slow = False
        cur = src
        visited = {cur}
        while cur != dst:
            nxt = self.nodes[cur].routing.next_hop_toward(dst)
            if nxt is None or nxt in visited:
                raise NoRouteError(f"no converged path {src} -> {dst}")
            live = [l for l in self.links_between(cur, nxt, "mesh") if l.up]
            if not live:
                raise NoRouteError(f"no live link {cur} -> {nxt}")
            slow = slow or live[0].slow
            visited.add(nxt)
            cur = nxt
        return slow

    # -- execution -----------------------------------------------------------------

    def schedule(self, event: ScenarioEvent) -> int:
        return self.sim.schedule(event)

    def run_until(self, t: int):
        return self.sim.run_until(t)

    def _deliver(self, receiver: str, frame: object, link: LinkSpec) -> bool:
        node = self.nodes.get(receiver)
        if node is None or not node.up:
            return False
        node.on_frame(frame, link)
        return True

    def _log(self, kind: str, **fields: object) -> None:
        self.sim.log.append(self.sim.clock.now, self.sim.next_seq(), kind,
                            **fields)

    # -- scenario event handlers ------------------------------------------------------

    def _execute(self, event: ScenarioEvent) -> None:
        handler = getattr(self, "_ev_" + event.kind.lower(), None)
        if handler is None:
            self._log("executor_error", event=event.kind, reason="unhandled")
            return
        try:
            handler(event.payload)
        except (SimError, ValueError, KeyError) as exc:
            self._log("executor_error", event=event.kind, detail=str(exc))

    def _node(self, payload: dict) -> PhoenixNode:
        return self.nodes[payload["node"]]

    def _ev_nodejoin(self, p: dict) -> None:
        self._node(p).boot()

    def _ev_nodeleave(self, p: dict) -> None:
        self._node(p).shutdown()

    def _set_links(self, p: dict, up: bool) -> None:
        # "kind" addresses parallel links programmatically; scenario files
        # spell it "link_kind" because "kind" there names the event itself.
        selector = p.get("kind", p.get("link_kind"))
        matches = self.links_between(p["a"], p["b"], selector)
        if not matches:
            self._log("executor_error", event="LinkState",
                      detail=f"no link {p['a']}~{p['b']}")
            return
        for link in matches:
            link.set_up(up)
            self._log("link_state", a=link.a, b=link.b, up=up,
                      link_kind=link.kind)
        for endpoint in (p["a"], p["b"]):
            node = self.nodes.get(endpoint)
            if node is not None and node.up:
                node._evaluate_phase()
                if node.agent.running:
                    node.agent.on_connectivity_change()

    def _ev_linkup(self, p: dict) -> None:
        self._set_links(p, True)

    def _ev_linkdown(self, p: dict) -> None:
        self._set_links(p, False)

    def _ev_deviceattach(self, p: dict) -> None:
        self._node(p).attach_device(
            p["device"], p["address"],
            tuple(p.get("services", ())), p.get("hostname"))

    def _ev_devicesend(self, p: dict) -> None:
        payload = p.get("payload", "")
        self._node(p).device_send(
            p["device"], p["dst"], int(p.get("size", 100)),
            payload.encode() if isinstance(payload, str) else payload,
            p.get("vni"), bool(p.get("eapol", False)))

    def _ev_devicecompromise(self, p: dict) -> None:
        self._node(p).compromise_device(p["device"])

    def _ev_registerclient(self, p: dict) -> None:
        node = self._node(p)
        try:
            node.voip.register_client(
                VoipClient(p["number"], p.get("client_kind", "Desk"), node.id))
        except (EnvironmentMissingError, ValueError) as exc:
            self._log("voip_reject", node=node.id, number=p["number"],
                      detail=str(exc))

    def _ev_placecall(self, p: dict) -> None:
        self._node(p).voip.route_call(p["number"], lambda attempt: None)

    def _ev_sendmessage(self, p: dict) -> None:
        node = self._node(p)
        try:
            node.voip.send_message(p["from"], p["to"], p.get("body", ""),
                                   lambda receipt: None)
        except NotRegisteredError:
            self._log("msg_reject", node=node.id, sender=p["from"],
                      reason="not_registered")

    def _ev_roamclient(self, p: dict) -> None:
        old = self.nodes[p["from"]]
        new = self.nodes[p["to"]]
        number = p["number"]
        reg = old.voip.registrations.get(number)
        if reg is None:
            self._log("roam_rejected", number=number, reason="not_registered",
                      node=old.id)
            return
        if reg.kind != "Mobile":
            self._log("roam_rejected", number=number, reason="not_mobile",
                      node=old.id)
            return
        old.voip.release_dns(number)
        try:
            new.voip.register_client(VoipClient(number, "Mobile", new.id),
                                     roamed=True)
            self._log("roam_completed", number=number, source=old.id,
                      target=new.id)
        except EnvironmentMissingError as exc:
            self._log("roam_rejected", number=number, reason=str(exc),
                      node=new.id)

    def _ev_shieldpair(self, p: dict) -> None:
        self._node(p).pair_shield(p["shield"], p["device"])

    def _ev_shieldactivate(self, p: dict) -> None:
        node = self._node(p)
        try:
            node.activate_shield(p["shield"],
                                 p.get("mode", sh.MODE_8021X),
                                 p.get("policy", sh.POLICY_AUTH_ONLY))
        except sh.NotPairedError:
            self._log("shield_reject", node=node.id, shield=p["shield"],
                      reason="NotPaired")

    def _ev_quarantinedevice(self, p: dict) -> None:
        self._node(p).quarantine_device(p["device"])

    def _ev_configapply(self, p: dict) -> None:
        node = self._node(p)
        if self.library is None:
            self._log("config_rejected", node=node.id, reason="no_model")
            return
        try:
            cfg = self.library.resolve(p["utility"], int(p["substation"]))
        except deployment.UnknownSubstationError as exc:
            self._log("config_rejected", node=node.id, reason="UnknownSubstation",
                      detail=str(exc))
            return
        try:
            node.apply_config(cfg)
        except deployment.AlreadyConfiguredError as exc:
            self._log("config_rejected", node=node.id,
                      reason="AlreadyConfigured", detail=str(exc))
            return
        self.assignments[(cfg.utility, cfg.substation)] = node.id

    def _ev_agentpartition(self, p: dict) -> None:
        self._node(p).agent.partition(int(p.get("duration_ms", 30_000)))
