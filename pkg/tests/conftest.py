"""Shared pytest wiring: print the acceptance checklist after the run."""
from __future__ import annotations

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        mod = next((m for name, m in sys.modules.items()
                    if name.endswith(".test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(results):
        terminalreporter.write_line(line)
