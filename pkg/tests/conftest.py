import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fwbq.density import GaussianMixture, random_mixture

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def mixture20():
    return random_mixture(20, 2, seed=0)


@pytest.fixture(scope="session")
def mixture1d():
    return GaussianMixture([0.3, 0.7], [[-1.0], [1.5]], [[[0.5]], [[1.2]]])


@pytest.fixture(scope="session")
def mixture2d():
    return GaussianMixture(
        [0.4, 0.6],
        [[0.0, 0.0], [1.0, -0.5]],
        [[[1.0, 0.3], [0.3, 0.6]], [[0.4, 0.0], [0.0, 0.9]]],
    )


def random_points(dim, n, seed):
    return np.random.default_rng(seed).normal(size=(n, dim))


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def report(request):
    """Record one ``criterion N: PASS/FAIL`` line for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def add(number, ok, detail):
        lines[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return add


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
