import sys

import numpy as np
import pytest

from streamproj.core import Buffer, Instance


def make_buffer(x, start_id=0, step=0, capacity=None):
    x = np.asarray(x, dtype=float)
    insts = [Instance(start_id + i, step, row) for i, row in enumerate(x)]
    return Buffer(insts, capacity or len(insts))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
