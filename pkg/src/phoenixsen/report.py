"""Run reports: the auditable summary of one simulation run.

A report is small and self-contained — scenario identity, seed, duration,
one result per registered audit, headline counters, and the digest of the
full event log. The JSON form round-trips exactly; the text form prints
one PASS/FAIL line per audit so a failing invariant is visible at a
glance in CI output.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .audits import AuditResult

#: Log record kinds surfaced as headline counters when present.
COUNTER_KINDS = (
    "frame_sent", "frame_delivered", "frame_dropped",
    "overlay_sent", "overlay_delivered", "overlay_drop", "lan_sent",
    "mcast_deliver", "mcast_dup",
    "dns_query", "dns_negative",
    "call_attempt", "msg_receipt",
    "alert", "unknown_vni", "shield_drop", "shield_diverted",
    "phase_changed", "scenario_event", "executor_error",
)


@dataclass(frozen=True)
class RunReport:
    """Everything needed to judge and reproduce one run."""

    scenario_id: str
    seed: int
    duration_ms: int
    audits: tuple[AuditResult, ...]
    counters: dict[str, int] = field(default_factory=dict)
    log_digest: str = ""

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.audits)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "audits": [a.to_dict() for a in self.audits],
            "counters": dict(sorted(self.counters.items())),
            "log_digest": self.log_digest,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(
            data["scenario_id"],
            data["seed"],
            data["duration_ms"],
            tuple(AuditResult.from_dict(a) for a in data["audits"]),
            dict(data.get("counters", {})),
            data.get("log_digest", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [
            f"scenario {self.scenario_id} seed {self.seed} "
            f"duration {self.duration_ms}ms",
            f"log digest {self.log_digest}",
        ]
        for a in self.audits:
            status = "PASS" if a.passed else "FAIL"
            lines.append(f"{status} {a.name} ({a.checked} checked): {a.detail}")
        good = sum(1 for a in self.audits if a.passed)
        lines.append(f"{good}/{len(self.audits)} audits passed")
        if self.counters:
            parts = ", ".join(f"{k}={v}"
                              for k, v in sorted(self.counters.items()))
            lines.append(f"counters: {parts}")
        return "\n".join(lines) + "\n"


def count_records(records: list[dict]) -> dict[str, int]:
    """Headline counters: occurrences of each notable record kind."""
    totals: dict[str, int] = {}
    for rec in records:
        kind = rec["kind"]
        totals[kind] = totals.get(kind, 0) + 1
    return {k: totals[k] for k in COUNTER_KINDS if k in totals}


def export_report(report: RunReport, fmt: str = "json") -> str:
    """Serialize a report as ``json`` (round-trips) or ``text`` (one
    PASS/FAIL line per audit)."""
    if fmt == "json":
        return report.to_json()
    if fmt == "text":
        return report.to_text()
    raise ValueError(f"unknown report format {fmt!r} (json or text)")
