"""Per-utility/per-VLAN virtual network isolation over the shared mesh.

Each (utility, VLAN type) pair gets a deterministic 24-bit VNI; frames from
substation devices are encapsulated with their environment's VNI for
transit and delivered only into an environment with the same VNI at the
destination node. A frame whose VNI has no local environment is a logged
security event, not a silent drop.
"""
from __future__ import annotations

import ipaddress
import logging
from dataclasses import dataclass, field
from typing import Optional

from .frames import InnerFrame, OverlayFrame

log = logging.getLogger("phoenixsen.overlay")

#: Canonical VLAN types; utilities pick from the first three, management is
#: the node-local shared environment every node hosts.
VLAN_TYPES = ("SCADA", "IT", "VoIP", "Management")
UTILITY_VLAN_TYPES = ("SCADA", "IT", "VoIP")

#: VNI of the shared management environment present on every node.
MGMT_VNI = 0

MAX_VLANS_PER_UTILITY = 16


class OverlayError(Exception):
    """Base class for overlay errors."""


class ModelBoundsError(OverlayError):
    """VNI allocation indices outside the deployment model's bounds."""


class NotAttachedError(OverlayError):
    """A device tried to send through an environment it is not attached to."""


def allocate_vni(utility_index: int, vlan_index: int) -> int:
    """Deterministic VNI for a (utility, VLAN) pair: u*16 + v + 1.

    Injective for vlan_index < 16; zero is reserved for management.
    """
    if utility_index < 0 or vlan_index < 0:
        raise ModelBoundsError(f"negative index ({utility_index}, {vlan_index})")
    if vlan_index >= MAX_VLANS_PER_UTILITY:
        raise ModelBoundsError(f"vlan_index {vlan_index} >= {MAX_VLANS_PER_UTILITY}")
    vni = utility_index * MAX_VLANS_PER_UTILITY + vlan_index + 1
    if vni >= (1 << 24):
        raise ModelBoundsError(f"utility_index {utility_index} overflows the VNI space")
    return vni


def default_subnet(utility_index: int, substation_index: int, vlan_index: int) -> str:
    """Default addressing: 10.<utility>.<substation*4 + vlan>.0/24."""
    third = substation_index * 4 + vlan_index
    if not 0 <= third <= 255:
        raise ModelBoundsError(
            f"substation {substation_index} x vlan {vlan_index} exceeds the default "
            f"addressing plan (octet {third})")
    if not 0 <= utility_index <= 255:
        raise ModelBoundsError(f"utility_index {utility_index} exceeds one octet")
    return f"10.{utility_index}.{third}.0/24"


def management_subnet(node_index: int) -> str:
    """Per-node slice of the shared management space: 10.255.<node>.0/24."""
    if not 0 <= node_index <= 255:
        raise ModelBoundsError(f"node index {node_index} exceeds one octet")
    return f"10.255.{node_index}.0/24"


@dataclass
class Device:
    """A substation LAN device attached to one network environment."""

    device_id: str
    address: str
    services: frozenset[int] = frozenset()
    hostname: Optional[str] = None
    compromised: bool = False
    quarantined: bool = False


@dataclass
class NetworkEnvironment:
    """One isolated service context on a node.

    ``utility`` is None only for the shared management environment.
    """

    utility: Optional[str]
    vlan_type: str
    vni: int
    subnet: str
    attached: dict[str, Device] = field(default_factory=dict)
    services: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.vlan_type not in VLAN_TYPES:
            raise ValueError(f"unknown vlan type {self.vlan_type!r}")
        self._net = ipaddress.ip_network(self.subnet)

    @property
    def key(self) -> tuple[str, str]:
        return (self.utility or "", self.vlan_type)

    @property
    def node_address(self) -> str:
        """The hosting node's own address in this environment (first host)."""
        return str(next(self._net.hosts()))

    def contains(self, address: str) -> bool:
        return ipaddress.ip_address(address) in self._net

    def attach(self, device: Device) -> None:
        if not self.contains(device.address):
            raise ValueError(
                f"address {device.address} outside environment subnet {self.subnet}")
        self.attached[device.device_id] = device

    def device_by_address(self, address: str) -> Optional[Device]:
        for dev in self.attached.values():
            if dev.address == address:
                return dev
        return None


def encapsulate(inner: InnerFrame, env: NetworkEnvironment, src_node: str,
                dst_node: str, auth_src: bool = False, fid: int = 0) -> OverlayFrame:
    """Tag an inner frame with the environment's VNI for mesh transit.

    The sending device must be attached to the environment; ``auth_src``
    records whether its frame was cryptographically verified at ingress
    (carried in the encapsulation flags, consumed by EtherShield egress).
    """
    sender = env.device_by_address(inner.src_device)
    if sender is None or sender.device_id not in env.attached:
        raise NotAttachedError(
            f"source {inner.src_device} is not attached to "
            f"{env.utility or 'management'}/{env.vlan_type}")
    return OverlayFrame(env.vni, src_node, dst_node, inner,
                        auth_src=auth_src, fid=fid)


def match_environment(envs: list[NetworkEnvironment], vni: int) -> Optional[NetworkEnvironment]:
    for env in envs:
        if env.vni == vni:
            return env
    return None
