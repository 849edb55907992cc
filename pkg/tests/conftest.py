import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from qkanseq import kernels  # noqa: E402
from shared import ACCEPTANCE_LINES  # noqa: E402


@pytest.fixture(params=kernels.BACKENDS)
def each_backend(request):
    """Run a test once per available kernel backend."""
    with kernels.use_backend(request.param):
        yield request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
