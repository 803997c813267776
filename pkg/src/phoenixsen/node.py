"""The node: one box binding mesh routing, environments, and services.

A node boots with only the shared management environment and joins the
mesh; applying its one-time deployment configuration creates the
per-utility environments and starts the configured services (DNS runs from
boot so unconfigured nodes still participate in the shared zone).

The node is also the substation LAN's trust mediator: it verifies shield
tags on ingress, records that provenance on the encapsulation, and re-tags
on egress toward a protected device only when the frame arrived with
verified provenance. LAN hops are a fixed 1 ms and never touch the global
RNG, so enabling a shield cannot perturb unrelated traffic.
"""
from __future__ import annotations

import logging
from typing import Callable, Optional

from . import deployment, frames as fr, overlay, shield as sh
from .dnssd import DnsService, DuplicateNameError
from .engine import LinkSpec
from .netmon import MonitorAgent, MonitorBackend
from .routing import MeshRouting, NoRouteError
from .voip import VoipService

log = logging.getLogger("phoenixsen.node")

LAN_LATENCY_MS = 1


class PhoenixNode:
    """One deployable box: router, environments, services, LAN mediator."""

    def __init__(self, node_id: str, network, node_index: int,
                 is_control_center: bool = False) -> None:
        self.id = node_id
        self.net = network
        self.index = node_index
        self.is_control_center = is_control_center
        self.up = False
        self.config: Optional[deployment.NodeConfig] = None
        self.phase = deployment.PHASE_BROADCAST
        self.environments: list[overlay.NetworkEnvironment] = [
            overlay.NetworkEnvironment(
                None, "Management", overlay.MGMT_VNI,
                overlay.management_subnet(node_index))
        ]
        self.routing = MeshRouting(self)
        self.dns = DnsService(self)
        self.voip = VoipService(self)
        self.agent = MonitorAgent(self)
        self.backend: Optional[MonitorBackend] = (
            MonitorBackend(self) if is_control_center else None)
        self.credentials = sh.CredentialStore(node_id)
        self.shields: dict[str, sh.ShieldDevice] = {}
        self._device_shield: dict[str, str] = {}

    # -- lifecycle ------------------------------------------------------------

    def boot(self) -> None:
        if self.up:
            return
        self.up = True
        self.log_event("node_state", up=True)
        self.routing.start()
        self.dns.start()
        self._claim_own_names()
        if self.backend is not None:
            self.backend.start()
        if self.config is not None:
            self._start_configured_services()
        self._evaluate_phase()

    def shutdown(self) -> None:
        if not self.up:
            return
        self.up = False
        self.log_event("node_state", up=False)
        self.voip.stop()
        self.agent.stop()
        self.routing.stop()
        self.dns.stop()
        self.phase = deployment.PHASE_BROADCAST

    def _claim_own_names(self) -> None:
        try:
            self.dns.assign_hostname(self.id, self.management_address())
        except DuplicateNameError as exc:
            self.log_event("hostname_conflict", name=self.id, detail=str(exc))
        for env in self.environments:
            for dev in env.attached.values():
                if dev.hostname:
                    try:
                        self.dns.assign_hostname(dev.hostname, dev.address)
                    except DuplicateNameError as exc:
                        self.log_event("hostname_conflict", name=dev.hostname,
                                       detail=str(exc))

    def _start_configured_services(self) -> None:
        services = self.config.services
        if "voip" in services and self.has_voip_env():
            self.voip.start()
        if "netmon-agent" in services:
            self.agent.start()

    # -- configuration ----------------------------------------------------------

    def apply_config(self, cfg: deployment.NodeConfig) -> None:
        """One-time deployment step; everything node-specific derives from it."""
        if self.config is not None:
            raise deployment.AlreadyConfiguredError(
                f"{self.id} is already configured as "
                f"{self.config.utility}/{self.config.substation}")
        self.config = cfg
        for tpl in cfg.environments:
            self.environments.append(overlay.NetworkEnvironment(
                tpl.utility, tpl.vlan_type, tpl.vni, tpl.subnet))
        self.log_event("config_applied", utility=cfg.utility,
                       substation=cfg.substation, dial_prefix=cfg.dial_prefix,
                       environments=[e.vni for e in cfg.environments])
        if self.up:
            self._start_configured_services()
            # Next advertisement must carry the new (utility, substation).
            self.routing._advertise()
            self._evaluate_phase()

    def env_by_key(self, utility: Optional[str],
                   vlan_type: str) -> Optional[overlay.NetworkEnvironment]:
        for env in self.environments:
            if env.key == ((utility or ""), vlan_type):
                return env
        return None

    def env_by_vni(self, vni: int) -> Optional[overlay.NetworkEnvironment]:
        return overlay.match_environment(self.environments, vni)

    def env_of_device(self, device_id: str) -> Optional[tuple[overlay.NetworkEnvironment, overlay.Device]]:
        for env in self.environments:
            dev = env.attached.get(device_id)
            if dev is not None:
                return env, dev
        return None

    # -- host facade (routing / dns / voip / netmon) ---------------------------

    def now(self) -> int:
        return self.net.sim.clock.now

    def call_at(self, at: int, fn: Callable[[], None]):
        return self.net.sim.call_at(at, fn)

    @property
    def node_id(self) -> str:
        return self.id

    def mesh_links(self) -> list[tuple[int, LinkSpec]]:
        if not self.up:
            return []
        return [(iface, link) for iface, link in self.net.links_of(self.id)
                if link.kind == "mesh" and link.up]

    def send_on(self, frame: object, link: LinkSpec) -> None:
        self.net.sim.transmit(frame, link, self.id)

    def log_event(self, kind: str, **fields: object) -> None:
        sim = self.net.sim
        sim.log.append(sim.clock.now, sim.next_seq(), kind, node=self.id,
                       **fields)

    def routing_identity(self) -> tuple[Optional[str], Optional[int]]:
        if self.config is None:
            return (None, None)
        return (self.config.utility, self.config.substation)

    def on_routes_changed(self) -> None:
        self._evaluate_phase()
        if self.agent.running:
            self.agent.on_connectivity_change()

    def deliver_multicast(self, origin: str, inner_kind: int, body: bytes) -> None:
        if inner_kind == fr.MK_DNS_PUBLISH:
            self.dns.on_publish(origin, body)
        elif inner_kind == fr.MK_DNS_QUERY:
            self.dns.on_query(origin, body)
        else:
            self.log_event("mcast_unknown_kind", inner_kind=inner_kind,
                           origin=origin)

    def deliver_unicast(self, env: fr.UnicastEnvelope) -> None:
        if env.kind == fr.UK_DNS_ANSWER:
            self.dns.on_answer(env)
        elif env.kind == fr.UK_NETMON:
            if self.backend is not None:
                self.backend.on_sample(env)
            else:
                self.log_event("unicast_unhandled", unicast_kind=env.kind,
                               origin=env.origin)
        elif env.kind == fr.UK_SIP:
            self.voip.on_sip(env)
        elif env.kind == fr.UK_MSG:
            self.voip.on_message(env)
        else:
            self.log_event("unicast_unhandled", unicast_kind=env.kind,
                           origin=env.origin)

    def send_unicast(self, dst: str, kind: int, body: bytes) -> None:
        self.routing.send_unicast(dst, kind, body)

    def originate_multicast(self, inner_kind: int, body: bytes) -> None:
        if self.up and self.routing.running:
            self.routing.originate_multicast(inner_kind, body)

    def raise_alert(self, subtype: str, subject: str, **extra) -> None:
        if self.agent.running:
            self.agent.ingest_ids_event(subtype, subject, **extra)
        else:
            self.log_event("ids_event", subtype=subtype, subject=subject,
                           **extra)

    # -- voip facade ------------------------------------------------------------

    def has_voip_env(self) -> bool:
        return (self.config is not None
                and self.env_by_key(self.config.utility, "VoIP") is not None)

    def dial_prefix(self) -> str:
        return self.config.dial_prefix if self.config else ""

    def voip_address(self) -> str:
        env = self.env_by_key(self.config.utility, "VoIP")
        return env.node_address

    def management_address(self) -> str:
        return f"10.255.{self.index}.1"

    def plan_media_path(self, target: str) -> bool:
        return self.net.plan_media_path(self.id, target)

    # -- netmon facade ----------------------------------------------------------

    def node_status(self) -> dict:
        return {
            "phase": self.phase,
            "configured": self.config is not None,
            "utility": self.config.utility if self.config else None,
            "substation": self.config.substation if self.config else None,
        }

    def link_snapshot(self) -> list[dict]:
        return [{"peer": link.other(self.id), "up": link.up,
                 "slow": link.slow, "latency_ms": link.latency_ms,
                 "bandwidth_kbps": link.bandwidth_kbps, "kind": link.kind}
                for _, link in self.net.links_of(self.id)]

    def device_snapshot(self) -> list[dict]:
        out = []
        for env in self.environments:
            for dev in sorted(env.attached.values(), key=lambda d: d.address):
                if dev.quarantined:
                    continue  # blocked at the node port: invisible to scans
                out.append({"address": dev.address, "device": dev.device_id,
                            "hostname": dev.hostname,
                            "services": sorted(dev.services),
                            "compromised": dev.compromised,
                            "vni": env.vni, "utility": env.utility,
                            "vlan_type": env.vlan_type})
        return out

    def backend_here(self) -> Optional[MonitorBackend]:
        return self.backend

    def backend_reachable(self, backend_node: str) -> bool:
        return self.routing.next_hop_toward(backend_node) is not None

    # -- formation phases ---------------------------------------------------------

    def _evaluate_phase(self) -> None:
        if not self.up:
            return
        expected: frozenset[int] = frozenset()
        if self.config is not None:
            spec = self.net.utility_spec(self.config.utility)
            if spec is not None:
                expected = frozenset(range(1, spec.substations + 1)) - {
                    self.config.substation}
        reachable = {(self.config.utility, self.config.substation)} \
            if self.config else set()
        for origin, rec in self.routing.db.records.items():
            if rec.utility is None or rec.substation is None:
                continue
            if origin == self.id or origin in self.routing.table:
                reachable.add((rec.utility, rec.substation))
        in_mesh = bool(self.routing.table) or bool(self.routing.neighbors)
        control = self.is_control_center or any(
            link.up and link.kind == "control"
            and self.net.is_control_center(link.other(self.id))
            for _, link in self.net.links_of(self.id))
        new_phase = deployment.evaluate_phase(
            configured=self.config is not None,
            utility=self.config.utility if self.config else None,
            expected_substations=expected,
            reachable_assignments=frozenset(reachable),
            in_mesh=in_mesh,
            control_to_cc=control)
        if new_phase != self.phase:
            previous, self.phase = self.phase, new_phase
            self.log_event("phase_changed", phase=new_phase, previous=previous)

    # -- frame reception ---------------------------------------------------------

    def on_frame(self, frame: object, link: LinkSpec) -> None:
        if isinstance(frame, fr.HelloFrame):
            if self.routing.running:
                self.routing.on_hello(frame, self._iface_of(link))
        elif isinstance(frame, fr.TopologyFrame):
            if self.routing.running:
                self.routing.on_topology(frame, link)
        elif isinstance(frame, fr.MulticastFrame):
            if self.routing.running:
                self.routing.on_multicast(frame, link)
        elif isinstance(frame, fr.UnicastEnvelope):
            if self.routing.running:
                self.routing.on_unicast(frame)
        elif isinstance(frame, fr.OverlayFrame):
            self._on_overlay(frame)
        else:
            self.log_event("frame_unhandled", frame=type(frame).__name__)

    def _iface_of(self, link: LinkSpec) -> int:
        for iface, l in self.net.links_of(self.id):
            if l is link:
                return iface
        return 0

    # -- overlay data plane --------------------------------------------------------

    def _on_overlay(self, frame: fr.OverlayFrame) -> None:
        if frame.dst_node != self.id:
            self._relay_overlay(frame)
            return
        self.decapsulate_deliver(frame)

    def _relay_overlay(self, frame: fr.OverlayFrame) -> None:
        relay = frame.hop()
        if relay.ttl <= 0:
            self.log_event("overlay_drop", reason="ttl", fid=frame.fid,
                           dst_node=frame.dst_node)
            return
        next_hop = self.routing.next_hop_toward(frame.dst_node)
        if next_hop is None:
            self.log_event("overlay_drop", reason="no_route", fid=frame.fid,
                           dst_node=frame.dst_node)
            return
        for iface, link in self.mesh_links():
            if link.other(self.id) == next_hop:
                self.send_on(relay, link)
                return
        self.log_event("overlay_drop", reason="no_route", fid=frame.fid,
                       dst_node=frame.dst_node)

    def decapsulate_deliver(self, frame: fr.OverlayFrame) -> list[str]:
        """Strictly scoped delivery; returns device ids that received it."""
        env = self.env_by_vni(frame.vni)
        if env is None:
            self.log_event("unknown_vni", vni=frame.vni,
                           src_node=frame.src_node, fid=frame.fid)
            self.raise_alert("unknown_vni", f"vni {frame.vni} from "
                             f"{frame.src_node}")
            return []
        if not self.net.vni_contains(frame.vni, frame.inner.src_device):
            self.log_event("overlay_drop", reason="foreign_source",
                           vni=frame.vni, src=frame.inner.src_device,
                           fid=frame.fid)
            self.raise_alert("foreign_source",
                             f"{frame.inner.src_device} in vni {frame.vni}")
            return []
        dev = env.device_by_address(frame.inner.dst_device)
        if dev is None:
            self.log_event("overlay_drop", reason="no_such_device",
                           vni=frame.vni, dst=frame.inner.dst_device,
                           fid=frame.fid)
            return []
        if dev.quarantined:
            self.log_event("overlay_drop", reason="quarantined",
                           vni=frame.vni, device=dev.device_id, fid=frame.fid)
            return []
        delivered = self._deliver_to_device(
            env, dev, frame.inner, authenticated=frame.auth_src,
            local_src=False, fid=frame.fid)
        return [dev.device_id] if delivered else []

    def _deliver_to_device(self, env: overlay.NetworkEnvironment,
                           dev: overlay.Device, inner: fr.InnerFrame,
                           authenticated: bool, local_src: bool,
                           fid: int) -> bool:
        """Egress mediation: re-tag toward a protected device only for
        frames whose provenance was verified; otherwise hand the shield an
        untagged frame and let its policy decide."""
        sid = self.credentials.shield_for_device(dev.device_id)
        if sid is not None and sid in self.shields:
            tag = (self.credentials.tag_for(sid, inner.encode())
                   if authenticated else None)
            lan = fr.LanFrame(inner, tag=tag, local_src=local_src)
            outcome = self.shields[sid].filter_frame(lan, "to_device")
            if outcome.kind == sh.DROP:
                self.log_event("shield_drop", shield=sid, reason=outcome.reason,
                               direction="to_device", device=dev.device_id,
                               fid=fid)
                self.raise_alert("shield_drop",
                                 f"{sid} {outcome.reason} to {dev.device_id}")
                return False
            if outcome.kind == sh.DIVERTED:
                self.log_event("shield_diverted", shield=sid,
                               device=dev.device_id, fid=fid)
                return False
        self.log_event("overlay_delivered", vni=env.vni, utility=env.utility,
                       vlan_type=env.vlan_type, device=dev.device_id,
                       dst=inner.dst_device, src=inner.src_device,
                       size=inner.size, authenticated=authenticated, fid=fid)
        return True

    # -- LAN ingress (device -> node) ---------------------------------------------

    def device_send(self, device_id: str, dst_address: str, size: int = 100,
                    payload: bytes = b"", vni_override: Optional[int] = None,
                    eapol: bool = False) -> None:
        """A LAN device hands the node a frame for ``dst_address``.

        The frame crosses the device's shield (if any), is provenance-checked
        at the node, then is delivered on the local LAN or encapsulated for
        the mesh. A compromised device may claim a foreign VNI; the node
        stack refuses any environment the device is not attached to.
        """
        found = self.env_of_device(device_id)
        if found is None:
            self.log_event("lan_drop", reason="unknown_device",
                           device=device_id)
            return
        env, dev = found
        if dev.quarantined:
            self.log_event("lan_drop", reason="quarantined", device=device_id)
            return
        inner = fr.InnerFrame(dev.address, dst_address, payload, size)
        lan = fr.LanFrame(inner, local_src=True, eapol=eapol)

        authenticated = False
        sid = self._device_shield.get(device_id)
        if sid is not None and sid in self.shields:
            outcome = self.shields[sid].filter_frame(lan, "from_device")
            if outcome.kind == sh.DROP:
                self.log_event("shield_drop", shield=sid, reason=outcome.reason,
                               direction="from_device", device=device_id)
                return
            if outcome.kind == sh.DIVERTED:
                self.log_event("shield_diverted", shield=sid, device=device_id)
                return
            lan = outcome.frame
            if lan.tag is not None:
                reason = self.credentials.verify(inner.encode(), lan.tag)
                if reason is not None:
                    self.log_event("shield_drop", shield=sid, reason=reason,
                                   direction="node_ingress", device=device_id)
                    self.raise_alert("shield_drop",
                                     f"{sid} {reason} at node ingress")
                    return
                authenticated = True

        target_env = env
        if vni_override is not None and vni_override != env.vni:
            if not dev.compromised:
                self.log_event("lan_drop", reason="vni_override_ignored",
                               device=device_id)
                return
            target_env = self.env_by_vni(vni_override)
            if target_env is None or target_env.attached.get(device_id) is None:
                # The claimed VNI names no environment this device belongs
                # to: same class of security event as receiving one.
                self.log_event("unknown_vni", vni=vni_override,
                               device=device_id, dst=dst_address,
                               context="ingress_injection")
                self.raise_alert("unknown_vni",
                                 f"injection of vni {vni_override} by "
                                 f"{device_id}", device=device_id)
                return
        self._send_via_env(target_env, dev, inner, authenticated)

    def _send_via_env(self, env: overlay.NetworkEnvironment,
                      dev: overlay.Device, inner: fr.InnerFrame,
                      authenticated: bool) -> None:
        fid = self.net.next_fid()
        if env.contains(inner.dst_device):
            # Same substation LAN: direct 1 ms hop, no mesh, no RNG.
            dst_dev = env.device_by_address(inner.dst_device)
            self.log_event("lan_sent", vni=env.vni, utility=env.utility,
                           vlan_type=env.vlan_type, src=inner.src_device,
                           dst=inner.dst_device, size=inner.size, fid=fid)
            if dst_dev is None:
                self.log_event("lan_drop", reason="no_such_device",
                               dst=inner.dst_device, fid=fid)
                return
            def _deliver() -> None:
                if self.up and not dst_dev.quarantined:
                    self._deliver_to_device(env, dst_dev, inner,
                                            authenticated=authenticated,
                                            local_src=True, fid=fid)
            self.call_at(self.now() + LAN_LATENCY_MS, _deliver)
            return
        located = self.net.locate_endpoint(env.vni, inner.dst_device)
        if located is None:
            self.log_event("overlay_drop", reason="no_endpoint", vni=env.vni,
                           dst=inner.dst_device, fid=fid)
            return
        dst_node = located
        try:
            oframe = overlay.encapsulate(inner, env, self.id, dst_node,
                                         auth_src=authenticated, fid=fid)
        except overlay.NotAttachedError:
            self.log_event("unknown_vni", vni=env.vni, device=dev.device_id,
                           dst=inner.dst_device, fid=fid,
                           context="unattached_send")
            self.raise_alert("unknown_vni",
                             f"unattached send into vni {env.vni} by "
                             f"{dev.device_id}")
            return
        self.log_event("overlay_sent", vni=env.vni, utility=env.utility,
                       vlan_type=env.vlan_type, src=inner.src_device,
                       dst=inner.dst_device, src_node=self.id,
                       dst_node=dst_node, size=inner.size,
                       authenticated=authenticated, fid=fid)
        if dst_node == self.id:
            self.decapsulate_deliver(oframe)
            return
        next_hop = self.routing.next_hop_toward(dst_node)
        if next_hop is None:
            self.log_event("overlay_drop", reason="no_route", fid=fid,
                           dst_node=dst_node)
            return
        for _, link in self.mesh_links():
            if link.other(self.id) == next_hop:
                self.send_on(oframe, link)
                return
        self.log_event("overlay_drop", reason="no_route", fid=fid,
                       dst_node=dst_node)

    # -- devices and shields ---------------------------------------------------------

    def attach_device(self, device_id: str, address: str,
                      services: tuple[int, ...] = (),
                      hostname: Optional[str] = None) -> overlay.Device:
        env = next((e for e in self.environments if e.contains(address)), None)
        if env is None:
            raise ValueError(f"{address} fits no environment on {self.id}")
        dev = overlay.Device(device_id, address, frozenset(services), hostname)
        env.attach(dev)
        self.log_event("device_attached", device=device_id, address=address,
                       vni=env.vni, hostname=hostname)
        if hostname and self.up:
            try:
                self.dns.assign_hostname(hostname, address)
            except DuplicateNameError as exc:
                self.log_event("hostname_conflict", name=hostname,
                               detail=str(exc))
        return dev

    def compromise_device(self, device_id: str) -> None:
        found = self.env_of_device(device_id)
        if found is None:
            return
        _, dev = found
        dev.compromised = True
        self.log_event("device_compromised", device=device_id)
        self.raise_alert("device_compromised", device_id)

    def quarantine_device(self, device_id: str) -> None:
        found = self.env_of_device(device_id)
        if found is None:
            return
        _, dev = found
        dev.quarantined = True
        self.log_event("device_quarantined", device=device_id)
        self.raise_alert("device_quarantined", device_id)

    def pair_shield(self, shield_id: str, device_id: str) -> sh.ShieldDevice:
        found = self.env_of_device(device_id)
        if found is None:
            raise ValueError(f"no device {device_id} on {self.id}")
        shield = sh.ShieldDevice(shield_id, device_id)
        self.credentials.pair(shield)
        self.shields[shield_id] = shield
        self._device_shield[device_id] = shield_id
        self.log_event("shield_paired", shield=shield_id, device=device_id)
        return shield

    def activate_shield(self, shield_id: str, mode: str, policy: str) -> None:
        """Build the authenticated control frame and deliver it over the LAN
        (fixed 1 ms, no RNG): activation cannot disturb other traffic."""
        shield = self.shields.get(shield_id)
        if shield is None:
            raise sh.NotPairedError(f"{self.id} has no shield {shield_id}")
        data = self.credentials.activation_frame(shield_id, mode, policy)

        def _arrive() -> None:
            try:
                new_mode, new_policy = shield.handle_control(data)
            except sh.BadControlAuthError as exc:
                self.log_event("shield_reject", shield=shield_id,
                               reason="BadControlAuth", detail=str(exc))
                return
            self.log_event("shield_activated", shield=shield_id,
                           mode=new_mode, policy=new_policy)

        self.call_at(self.now() + LAN_LATENCY_MS, _arrive)
