import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


class FixedChoice:
    """Stand-in rng whose ``choice`` returns pinned draws in order."""

    def __init__(self, *draws):
        self.draws = [np.asarray(d) for d in draws]

    def choice(self, n, size, replace=False):
        d = self.draws.pop(0)
        assert len(d) == size and d.max() < n
        return d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixed_choice():
    return FixedChoice


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def _report(num, ok, detail):
        line = "criterion %d: %s  %s" % (num, "PASS" if ok else "FAIL", detail)
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
