import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gausskin.rig import make_test_rig

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_rig():
    """(skeleton, weights, cloud) of a short 3-bone tube."""
    return make_test_rig(3, gaussians_per_ring=12, rings=15)


@pytest.fixture(scope="session")
def fixture_rig():
    """The default 3-bone tube used by the CLI fixture."""
    return make_test_rig(3)


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def check(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
