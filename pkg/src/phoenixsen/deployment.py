"""Configuration synthesis and the four-phase formation ladder.

A whole-network deployment model (utilities, substation counts, VLAN
types, addressing and dial-plan overrides) compiles into a per-substation
configuration library. Synthesis is a pure function: the same model always
serializes to byte-identical output. Applying one entry to a node is the
one-time deployment step; everything else a node does derives from it.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from . import overlay

log = logging.getLogger("phoenixsen.deployment")

DEFAULT_SERVICES = ("dns", "hostnames", "voip", "netmon-agent")

PHASE_BROADCAST = 1
PHASE_CONTROL = 2
PHASE_MESH = 3
PHASE_FULL = 4


class ModelInvalidError(Exception):
    """Deployment model failed validation; ``problems`` lists (field, message)."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        detail = "; ".join(f"{f}: {m}" for f, m in problems)
        super().__init__(f"invalid deployment model: {detail}")


class UnknownSubstationError(KeyError):
    """(utility, substation) absent from the configuration library."""


class AlreadyConfiguredError(Exception):
    """Deployment configuration was already applied to this node."""


@dataclass(frozen=True)
class UtilitySpec:
    name: str
    substations: int
    vlan_types: tuple[str, ...] = overlay.UTILITY_VLAN_TYPES


@dataclass(frozen=True)
class DeploymentModel:
    """The operator's network plan; input to synthesis.

    ``addressing`` overrides subnets per "utility/substation/vlan" key;
    ``dial_prefixes`` overrides the computed prefix per "utility/substation".
    """

    utilities: tuple[UtilitySpec, ...]
    addressing: dict[str, str] = field(default_factory=dict)
    dial_prefixes: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "DeploymentModel":
        utilities = tuple(
            UtilitySpec(u["name"], int(u["substations"]),
                        tuple(u.get("vlan_types", overlay.UTILITY_VLAN_TYPES)))
            for u in data.get("utilities", []))
        return cls(utilities,
                   dict(data.get("addressing", {})),
                   dict(data.get("dial_prefixes", {})))

    def to_dict(self) -> dict:
        return {
            "utilities": [
                {"name": u.name, "substations": u.substations,
                 "vlan_types": list(u.vlan_types)} for u in self.utilities],
            "addressing": dict(sorted(self.addressing.items())),
            "dial_prefixes": dict(sorted(self.dial_prefixes.items())),
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def utility_index(self, name: str) -> int:
        for i, u in enumerate(self.utilities):
            if u.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class EnvTemplate:
    """Blueprint for one network environment on a configured node."""

    utility: Optional[str]
    vlan_type: str
    vni: int
    subnet: str


@dataclass(frozen=True)
class NodeConfig:
    """Everything one node needs for its (utility, substation) role."""

    utility: str
    substation: int  # 1-based substation number
    utility_index: int
    environments: tuple[EnvTemplate, ...]
    dial_prefix: str
    services: tuple[str, ...] = DEFAULT_SERVICES

    def to_dict(self) -> dict:
        return {
            "utility": self.utility,
            "substation": self.substation,
            "utility_index": self.utility_index,
            "environments": [
                {"utility": e.utility, "vlan_type": e.vlan_type,
                 "vni": e.vni, "subnet": e.subnet}
                for e in self.environments],
            "dial_prefix": self.dial_prefix,
            "services": list(self.services),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NodeConfig":
        return cls(d["utility"], d["substation"], d["utility_index"],
                   tuple(EnvTemplate(e["utility"], e["vlan_type"], e["vni"],
                                     e["subnet"])
                         for e in d["environments"]),
                   d["dial_prefix"], tuple(d["services"]))


@dataclass(frozen=True)
class ConfigLibrary:
    """Synthesized map (utility, substation) → NodeConfig."""

    model_digest: str
    configs: dict[tuple[str, int], NodeConfig]

    def resolve(self, utility: str, substation: int) -> NodeConfig:
        try:
            return self.configs[(utility, substation)]
        except KeyError:
            raise UnknownSubstationError(
                f"no configuration for utility {utility!r} substation {substation}"
            ) from None

    def to_json(self) -> str:
        body = {
            "model_digest": self.model_digest,
            "configs": {f"{u}/{s}": cfg.to_dict()
                        for (u, s), cfg in sorted(self.configs.items())},
        }
        return json.dumps(body, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ConfigLibrary":
        data = json.loads(text)
        configs = {}
        for key, cfg in data["configs"].items():
            utility, substation = key.rsplit("/", 1)
            configs[(utility, int(substation))] = NodeConfig.from_dict(cfg)
        return cls(data["model_digest"], configs)


def default_dial_prefix(utility_index: int, substation_index: int) -> str:
    """Substation i (0-based) of utility u dials as (u*10 + i + 1), two digits."""
    value = utility_index * 10 + substation_index + 1
    return f"{value:02d}"


def validate(model: DeploymentModel) -> list[tuple[str, str]]:
    problems: list[tuple[str, str]] = []
    seen = set()
    if not model.utilities:
        problems.append(("utilities", "at least one utility required"))
    for i, u in enumerate(model.utilities):
        where = f"utilities[{i}]"
        if not u.name:
            problems.append((where + ".name", "empty name"))
        if u.name in seen:
            problems.append((where + ".name", f"duplicate utility name {u.name!r}"))
        seen.add(u.name)
        if u.substations < 1:
            problems.append((where + ".substations", "substation count must be >= 1"))
        if not u.vlan_types:
            problems.append((where + ".vlan_types", "at least one VLAN type required"))
        for v in u.vlan_types:
            if v not in overlay.UTILITY_VLAN_TYPES:
                problems.append((where + ".vlan_types",
                                 f"unknown VLAN type {v!r} (management is implicit)"))
        if len(set(u.vlan_types)) != len(u.vlan_types):
            problems.append((where + ".vlan_types", "duplicate VLAN type"))
    for key in model.addressing:
        if len(key.split("/")) != 3:
            problems.append((f"addressing[{key!r}]",
                             "key must be utility/substation/vlan"))
    for key in model.dial_prefixes:
        if len(key.split("/")) != 2:
            problems.append((f"dial_prefixes[{key!r}]",
                             "key must be utility/substation"))
    return problems


def synthesize(model: DeploymentModel) -> ConfigLibrary:
    """Compile the model into per-substation configurations.

    Deterministic: VNIs from the allocation formula, subnets from the
    default addressing plan unless overridden, dial prefixes computed then
    overridden, with whole-plan uniqueness enforced.
    """
    problems = validate(model)
    if problems:
        raise ModelInvalidError(problems)

    configs: dict[tuple[str, int], NodeConfig] = {}
    prefix_owners: dict[str, tuple[str, int]] = {}
    for u_idx, util in enumerate(model.utilities):
        for s_idx in range(util.substations):
            substation = s_idx + 1
            envs = []
            for v_idx, vlan in enumerate(util.vlan_types):
                try:
                    vni = overlay.allocate_vni(u_idx, v_idx)
                except overlay.ModelBoundsError as exc:
                    raise ModelInvalidError(
                        [(f"utilities[{u_idx}].vlan_types", str(exc))]) from exc
                override = model.addressing.get(f"{util.name}/{substation}/{vlan}")
                try:
                    subnet = override or overlay.default_subnet(u_idx, s_idx, v_idx)
                except overlay.ModelBoundsError as exc:
                    raise ModelInvalidError(
                        [(f"utilities[{u_idx}].substations", str(exc))]) from exc
                envs.append(EnvTemplate(util.name, vlan, vni, subnet))
            prefix = model.dial_prefixes.get(
                f"{util.name}/{substation}", default_dial_prefix(u_idx, s_idx))
            if not (prefix.isdigit() and len(prefix) == 2):
                raise ModelInvalidError([
                    (f"dial_prefixes[{util.name}/{substation}]",
                     f"prefix must be two digits, got {prefix!r}")])
            owner = prefix_owners.setdefault(prefix, (util.name, substation))
            if owner != (util.name, substation):
                raise ModelInvalidError([
                    (f"dial_prefixes[{util.name}/{substation}]",
                     f"prefix {prefix} already used by {owner[0]}/{owner[1]}")])
            configs[(util.name, substation)] = NodeConfig(
                util.name, substation, u_idx, tuple(envs), prefix)
    return ConfigLibrary(model.digest(), configs)


def evaluate_phase(*, configured: bool, utility: Optional[str],
                   expected_substations: frozenset[int],
                   reachable_assignments: frozenset[tuple[str, int]],
                   in_mesh: bool, control_to_cc: bool) -> int:
    """Formation phase ladder, highest satisfied rung wins.

    4: configured and every other substation of the node's utility is served
       by a reachable node; 3: member of a mesh (any route or neighbor);
    2: live control channel to the control center; 1: broadcast-only floor.
    """
    if configured and utility is not None:
        served = {s for (u, s) in reachable_assignments if u == utility}
        if expected_substations <= served:
            return PHASE_FULL
    if in_mesh:
        return PHASE_MESH
    if control_to_cc:
        return PHASE_CONTROL
    return PHASE_BROADCAST
