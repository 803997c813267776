"""phoenixsen — deterministic simulator and protocol library for a
self-forming secure emergency network.

The package models rapidly deployable substation nodes that mesh over
scavenged links, isolate per-utility traffic in tunneled overlays, run
masterless service discovery, route voice and messages, watch the field
with store-and-forward monitoring, and retrofit legacy gear with inline
authentication shields — all on a single-threaded, integer-millisecond
event engine whose runs reproduce bit-for-bit from (model, scenario,
seed).

Typical entry points::

    from phoenixsen import harness
    result = harness.run_scenario("drill.json", seed=7)
    print(result.report.to_text())

or from a shell: ``phoenix run drill.json``.
"""
from __future__ import annotations

from .audits import AUDITS, AuditResult, run_audits
from .deployment import (
    ConfigLibrary,
    DeploymentModel,
    ModelInvalidError,
    NodeConfig,
    UtilitySpec,
    synthesize,
)
from .engine import (
    EVENT_KINDS,
    EventLog,
    LinkSpec,
    ScenarioEvent,
    SimError,
    Simulator,
)
from .harness import RunResult, build_report, run_loaded, run_scenario
from .network import Network
from .report import RunReport, export_report
from .scenario import (
    ParseError,
    Scenario,
    build_network,
    load_scenario,
    parse_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AUDITS",
    "AuditResult",
    "ConfigLibrary",
    "DeploymentModel",
    "EVENT_KINDS",
    "EventLog",
    "LinkSpec",
    "ModelInvalidError",
    "Network",
    "NodeConfig",
    "ParseError",
    "RunReport",
    "RunResult",
    "Scenario",
    "ScenarioEvent",
    "SimError",
    "Simulator",
    "UtilitySpec",
    "build_network",
    "build_report",
    "export_report",
    "load_scenario",
    "parse_scenario",
    "run_audits",
    "run_loaded",
    "run_scenario",
    "synthesize",
    "__version__",
]
