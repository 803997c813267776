"""Run orchestration: scenario file in, audited report out.

This is the library behind the command-line interface and the API
server: load and validate a scenario (plus an optional external
deployment model that overrides the embedded one), build the network,
run to the horizon, run every audit, and fold the result into a
:class:`~phoenixsen.report.RunReport`.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import deployment, scenario as scn
from .audits import run_audits
from .network import Network
from .report import RunReport, count_records

log = logging.getLogger("phoenixsen.harness")


@dataclass
class RunResult:
    """A completed run: the report plus the live objects behind it."""

    report: RunReport
    network: Network
    scenario: scn.Scenario

    @property
    def records(self) -> list[dict]:
        return self.network.sim.log.records


def load_model(path: str | Path) -> deployment.DeploymentModel:
    """Read a deployment model file; raises ParseError or ModelInvalidError."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise scn.ParseError(f"cannot read model {p}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise scn.ParseError(f"{p}: invalid JSON: {exc.msg}",
                             line=exc.lineno, column=exc.colno) from exc
    model = deployment.DeploymentModel.from_dict(data)
    problems = deployment.validate(model)
    if problems:
        raise deployment.ModelInvalidError(problems)
    return model


def run_scenario(scenario_path: str | Path, *,
                 model_path: Optional[str | Path] = None,
                 seed: Optional[int] = None,
                 until: Optional[int] = None) -> RunResult:
    """Execute one scenario end to end and audit the result.

    ``seed`` and ``until`` override the scenario's own values;
    ``model_path`` replaces its embedded deployment model. The returned
    result carries the full network for inspection or live serving.
    """
    scenario = scn.load_scenario(scenario_path)
    model = load_model(model_path) if model_path is not None else None
    return run_loaded(scenario, model=model, seed=seed, until=until)


def run_loaded(scenario: scn.Scenario, *,
               model: Optional[deployment.DeploymentModel] = None,
               seed: Optional[int] = None,
               until: Optional[int] = None) -> RunResult:
    """Like :func:`run_scenario` for an already-parsed scenario."""
    horizon = scenario.duration_ms if until is None else until
    used_seed = scenario.seed if seed is None else seed
    net = scn.build_network(scenario, model=model, seed=used_seed)
    net.run_until(horizon)
    report = build_report(scenario.scenario_id, used_seed, horizon, net)
    log.info("run %s seed=%d: %s", scenario.scenario_id, used_seed,
             "PASS" if report.passed else "FAIL")
    return RunResult(report, net, scenario)


def build_report(scenario_id: str, seed: int, duration_ms: int,
                 net: Network) -> RunReport:
    """Audit a finished network and assemble its report."""
    records = net.sim.log.records
    results = tuple(run_audits(net, records))
    return RunReport(scenario_id, seed, duration_ms, results,
                     count_records(records), net.sim.log.digest())


def write_log(net: Network, path: str | Path) -> None:
    """Dump the run's event log as newline-delimited JSON."""
    Path(path).write_text(net.sim.log.to_ndjson())
