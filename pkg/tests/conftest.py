import math

import numpy as np
import pytest

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def within_stderr(draws, expected, k=4.0):
    """True when the sample mean is within k standard errors of ``expected``."""
    draws = np.asarray(draws, dtype=float)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    return abs(draws.mean() - expected) <= k * se


@pytest.fixture
def check_mean():
    return within_stderr


@pytest.fixture
def criterion():
    """Record and print one verdict line per acceptance criterion."""

    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
