import os

import pytest

from proxi_score_vi import kernels

ACCEPTANCE_LINES = []


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.backend_name()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
