"""``phoenix`` — run, audit, serve, and inspect simulated deployments.

Exit codes: 0 — run completed and every audit passed; 1 — run completed
but at least one audit failed; 2 — the scenario or model was rejected
before the run started (parse or validation error); 3 — the API server
could not bind its address.

``PHOENIX_LOG`` sets the log level (``debug``, ``info``, ``warning``,
``error``); default is warnings only.
"""
from __future__ import annotations

import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

import click

from . import deployment, harness, scenario as scn
from .apiserver import BindFailure, InspectSession, LiveSession, serve
from .report import RunReport, export_report

EXIT_AUDIT_FAILED = 1
EXIT_REJECTED = 2
EXIT_BIND = 3


def _setup_logging() -> None:
    level_name = os.environ.get("PHOENIX_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _resolve_scenario(path_or_name: str) -> Path:
    """A real path wins; otherwise try the bundled scenario library."""
    p = Path(path_or_name)
    if p.exists():
        return p
    name = path_or_name if path_or_name.endswith(".json") \
        else path_or_name + ".json"
    bundled = resources.files("phoenixsen") / "scenarios" / name
    try:
        if bundled.is_file():
            with resources.as_file(bundled) as real:
                return Path(str(real))
    except (OSError, TypeError):
        pass
    raise scn.ParseError(
        f"no scenario file {path_or_name!r} and no bundled scenario of "
        f"that name (try: {', '.join(sorted(list_bundled()))})")


def list_bundled() -> list[str]:
    out = []
    try:
        for entry in (resources.files("phoenixsen") / "scenarios").iterdir():
            if entry.name.endswith(".json"):
                out.append(entry.name[:-5])
    except OSError:
        pass
    return out


def _run_or_exit(scenario_path: str, model: Optional[str], seed: Optional[int],
                 until: Optional[int]) -> harness.RunResult:
    try:
        return harness.run_scenario(
            _resolve_scenario(scenario_path), model_path=model,
            seed=seed, until=until)
    except (scn.ParseError, deployment.ModelInvalidError) as exc:
        click.echo(f"rejected: {exc}", err=True)
        sys.exit(EXIT_REJECTED)


@click.group(help=__doc__)
def main() -> None:
    _setup_logging()


@main.command(help="Compile a deployment model into its configuration "
                   "library (JSON on stdout or --out).")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", type=click.Path(dir_okay=False),
              help="Write the library here instead of stdout.")
def synth(model_path: str, out: Optional[str]) -> None:
    try:
        model = harness.load_model(model_path)
        library = deployment.synthesize(model)
    except (scn.ParseError, deployment.ModelInvalidError) as exc:
        click.echo(f"rejected: {exc}", err=True)
        sys.exit(EXIT_REJECTED)
    text = library.to_json()
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {len(library.configs)} configurations to {out}")
    else:
        click.echo(text, nl=False)


@main.command(help="Run a scenario to completion, audit it, and print the "
                   "report. Exit 0 only if every audit passes.")
@click.argument("scenario_path")
@click.option("--model", type=click.Path(exists=True, dir_okay=False),
              help="Deployment model overriding the scenario's own.")
@click.option("--seed", type=int, default=None,
              help="Override the scenario seed.")
@click.option("--until", type=int, default=None,
              help="Stop at this simulation time (ms) instead of the "
                   "scenario duration.")
@click.option("--export", "fmt", type=click.Choice(["text", "json"]),
              default="text", show_default=True,
              help="Report format on stdout.")
@click.option("--out", type=click.Path(dir_okay=False),
              help="Also write the JSON report here.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False),
              help="Write the full event log (NDJSON) here.")
def run(scenario_path: str, model: Optional[str], seed: Optional[int],
        until: Optional[int], fmt: str, out: Optional[str],
        log_path: Optional[str]) -> None:
    result = _run_or_exit(scenario_path, model, seed, until)
    click.echo(export_report(result.report, fmt), nl=False)
    if out:
        Path(out).write_text(result.report.to_json())
    if log_path:
        harness.write_log(result.network, log_path)
    if not result.report.passed:
        sys.exit(EXIT_AUDIT_FAILED)


@main.command(help="Run a scenario and print one PASS/FAIL line per audit.")
@click.argument("scenario_path")
@click.option("--model", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--until", type=int, default=None)
def audit(scenario_path: str, model: Optional[str], seed: Optional[int],
          until: Optional[int]) -> None:
    result = _run_or_exit(scenario_path, model, seed, until)
    for a in result.report.audits:
        status = "PASS" if a.passed else "FAIL"
        click.echo(f"{status} {a.name} ({a.checked} checked): {a.detail}")
    if not result.report.passed:
        sys.exit(EXIT_AUDIT_FAILED)


@main.command("serve",
              help="Serve a run over HTTP/WebSocket. Default: run to "
                   "completion first and serve the frozen result for "
                   "inspection; --live replays at wall-clock pace and "
                   "accepts operator actions.")
@click.argument("scenario_path")
@click.option("--model", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--until", type=int, default=None,
              help="(inspection mode) stop the pre-run at this time.")
@click.option("--live", is_flag=True,
              help="Advance simulation time at wall-clock pace and accept "
                   "POST /actions.")
@click.option("--rate", type=float, default=1.0, show_default=True,
              help="(live mode) simulation ms per wall-clock ms.")
@click.option("--bind", default="127.0.0.1:8470", show_default=True,
              help="Listen address host:port.")
def serve_cmd(scenario_path: str, model: Optional[str], seed: Optional[int],
              until: Optional[int], live: bool, rate: float,
              bind: str) -> None:
    try:
        if live:
            scenario = scn.load_scenario(_resolve_scenario(scenario_path))
            loaded = harness.load_model(model) if model else None
            session = LiveSession(scenario, model=loaded, seed=seed,
                                  rate=rate).start()
        else:
            result = _run_or_exit(scenario_path, model, seed, until)
            session = InspectSession(result)
    except (scn.ParseError, deployment.ModelInvalidError) as exc:
        click.echo(f"rejected: {exc}", err=True)
        sys.exit(EXIT_REJECTED)
    click.echo(f"serving {scenario_path} ({'live' if live else 'inspect'}) "
               f"on http://{bind}")
    try:
        serve(session, bind)
    except BindFailure as exc:
        click.echo(f"bind failed: {exc}", err=True)
        sys.exit(EXIT_BIND)
    finally:
        session.stop()


@main.command(help="Re-render a saved JSON report as text (or validate it "
                   "round-trips).")
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]),
              default="text", show_default=True)
def export(report_path: str, fmt: str) -> None:
    report = RunReport.from_json(Path(report_path).read_text())
    click.echo(export_report(report, fmt), nl=False)


@main.command(help="List the scenarios bundled with the package.")
def scenarios() -> None:
    for name in sorted(list_bundled()):
        click.echo(name)


if __name__ == "__main__":
    main()
