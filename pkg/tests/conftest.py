from __future__ import annotations

import sys

import pytest
from hypothesis import HealthCheck, settings

from longrange.potential import PotentialSpec, integrate_fundamental

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def pair_zero():
    return integrate_fundamental(PotentialSpec.zero(), 1e5, 0.01)


@pytest.fixture(scope="session")
def pair_inv():
    return integrate_fundamental(PotentialSpec.inverse_square(0.09, 1.0), 1e5, 0.01)


def pytest_terminal_summary(terminalreporter):
    # read the verdict lines from the module instance pytest collected
    lines = [line for name, mod in list(sys.modules.items()) if name.endswith("test_acceptance")
             for line in getattr(mod, "VERDICTS", [])]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
