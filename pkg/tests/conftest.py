"""Shared fixtures.

The desk-scale convergence study is the most expensive artifact the test
suite needs (several minutes); it is computed once per session and shared
by the property tests and the acceptance gate.
"""

import time

import pytest

from nngplab.cli import PRESETS
from nngplab.experiments import run_convergence_study, study_from_document

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL verdict line per acceptance criterion."""

    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"ACCEPTANCE[{number}] {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line, flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def desk_study():
    """(ConvergenceTable, elapsed seconds) for the desk-scale preset."""
    study = study_from_document(PRESETS["appendix-a-desk"])
    start = time.perf_counter()
    table = run_convergence_study(study)
    elapsed = time.perf_counter() - start
    return table, elapsed
