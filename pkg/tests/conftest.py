import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sdebye.manifold import Sphere2, Torus

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

TWO_PI = 2 * np.pi


@pytest.fixture
def torus8():
    return Torus.square(8)


@pytest.fixture
def sphere8():
    return Sphere2(8)


def random_coeffs(manifold, seed):
    rng = np.random.default_rng(seed)
    shape = manifold.coeff_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.where(manifold.mode_mask, c, 0.0)


# filled by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
