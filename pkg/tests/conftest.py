import numpy as np
import pytest

from rsplit.rate_mc import clear_gain_cache

ACCEPTANCE_LINES = []


def report(number: int, passed: bool, detail: str) -> None:
    """Record and print one acceptance verdict line."""
    line = f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _fresh_gain_cache():
    clear_gain_cache()
    yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
