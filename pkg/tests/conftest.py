"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import pytest

from hybridpilot.scenario import make_scenario

_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(name, passed, detail)``; returns ``passed``."""

    def _report(name: str, passed: bool, detail: str) -> bool:
        passed = bool(passed)
        _RESULTS.append((name, passed, detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        return passed

    return _report


@pytest.fixture(scope="session")
def default_scenario():
    """7 cells, 10 users per cell, M=256, 20 dB, path-loss exponent 3.8."""
    return make_scenario(seed=0)


@pytest.fixture(scope="session")
def small_scenario():
    return make_scenario(L=3, K=2, M=64, T=40, seed=1)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
