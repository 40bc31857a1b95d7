import math

import pytest
from hypothesis import settings

from gaussfisher.markovian import SystemParams
from gaussfisher.qbm import QbmParams

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def fig1_squeezed():
    """omega = 2.1, beta = -0.5i, alpha = i, gamma = 0.05."""
    return SystemParams(2.1, 0.5, -math.pi / 2, 1.0, math.pi / 2, gamma=0.05)


@pytest.fixture
def optdyne_params():
    return SystemParams.from_cartesian(2.1, 0.3, -0.5, 0.0, 1.0, gamma=0.05, n_th=0.1)


@pytest.fixture
def slow_bath():
    """Bath with long memory (cutoff well below the system frequency)."""
    return QbmParams(omega=7.0, xi=0.3, lambda_c=1.0, temp_ratio=1000.0)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
