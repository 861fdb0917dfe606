import numpy as np
import pytest

from mhdstrip.grid import GridSpec, SpectralField


def random_field(grid, rng, kmax=None, zero_mean=False):
    """Real random field with a few smooth wall-normal shapes per mode."""
    y = grid.y_nodes
    phys = np.zeros((grid.nx, grid.ny))
    x = grid.x_nodes[:, None]
    top = kmax or grid.nx // 3
    for k in range(0 if not zero_mean else 1, top + 1):
        for n in (1, 2, 3):
            a, b = rng.normal(size=2) / (1 + k)
            phys += (a * np.cos(k * x) + b * np.sin(k * x)) * np.sin(n * np.pi * y)[None, :]
    return SpectralField.from_physical(grid, phys)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid():
    return GridSpec(2 * np.pi, 32, 16)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
