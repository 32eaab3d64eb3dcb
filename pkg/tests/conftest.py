import numpy as np
import pytest

from bridgematch.core import root_stream


@pytest.fixture
def stream():
    return root_stream(12345)


@pytest.fixture
def np_rng():
    return np.random.default_rng(2024)


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = getattr(sys.modules.get("test_acceptance"), "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
