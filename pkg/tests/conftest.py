"""Shared pytest hooks.

Echoes the acceptance-criterion verdict lines after the run; pytest
captures per-test stdout of passing tests, so the lines would otherwise
only be visible for failures.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None) if mod else None
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
