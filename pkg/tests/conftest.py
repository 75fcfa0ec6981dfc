import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crnshare.harness import presets

settings.register_profile(
    "crnshare", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("crnshare")

# lines printed by the acceptance tests, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_cfg():
    return presets.fig4_config(0.3)


@pytest.fixture
def small_nsi():
    return presets.fig4_nsi()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
