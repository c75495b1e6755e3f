from __future__ import annotations

import time

import pytest

from perchsim.scenario import builtin_scenario
from perchsim.simrun import run_scenario

_LOGS: dict = {}


def builtin_log(name: str):
    """Default-configuration run of a builtin scenario, shared across the session."""
    if name not in _LOGS:
        t0 = time.perf_counter()
        log = run_scenario(builtin_scenario(name))
        _LOGS[name] = (log, time.perf_counter() - t0)
    return _LOGS[name][0]


def builtin_runtime(name: str) -> float:
    builtin_log(name)
    return _LOGS[name][1]


@pytest.fixture(scope="session")
def logs():
    return builtin_log


ACCEPTANCE: list = []


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
