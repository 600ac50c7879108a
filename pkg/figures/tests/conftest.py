"""Shared fixtures for the figures test suite."""

from __future__ import annotations

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL verdict line per acceptance criterion."""

    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        verdict = "PASS" if ok else "FAIL"
        line = f"ACCEPTANCE[{number}] {name}: {verdict}  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("figure acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
