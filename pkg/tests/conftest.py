import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from arisim.pipeline import deep_scenario, run_joint, shallow_scenario

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def shallow():
    return shallow_scenario()


@pytest.fixture(scope="session")
def deep():
    return deep_scenario()


@pytest.fixture(scope="session")
def shallow_joint(shallow):
    return run_joint(shallow, seed=0)


@pytest.fixture(scope="session")
def deep_joint(deep):
    return run_joint(deep, seed=0)



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
