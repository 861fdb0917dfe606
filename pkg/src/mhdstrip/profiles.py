"""Named initial-data catalog (unweighted horizontal components u_0, b_0)."""

from __future__ import annotations

import numpy as np

from .grid import ConfigError, GridSpec, SpectralField
from .imex import project_zero_mean


def _s(n, y):
    return np.sin(2 * np.pi * n * y)


def _packet(x):
    return np.exp(2.0 * (np.cos(x - np.pi) - 1.0))


# each entry maps (x, y) on the 2pi-periodic strip to (u_0, b_0) at unit amplitude
_CATALOG = {
    "zero": lambda x, y: (0 * x, 0 * x),
    "mode1": lambda x, y: (np.cos(x) * _s(1, y), np.sin(x) * _s(1, y)),
    "mode2": lambda x, y: (
        np.cos(x) * _s(1, y) + 0.5 * np.sin(2 * x) * _s(2, y),
        np.sin(x) * _s(1, y) + 0.5 * np.cos(2 * x) * _s(2, y),
    ),
    "packet": lambda x, y: (
        _packet(x) * np.cos(4 * x) * _s(1, y),
        _packet(x) * np.sin(4 * x) * _s(1, y),
    ),
    "mode3": lambda x, y: (np.cos(3 * x) * _s(1, y), np.cos(x) * _s(2, y)),
    "mixed": lambda x, y: (
        np.sin(x) * _s(1, y) + 0.3 * np.cos(3 * x) * _s(1, y),
        0.5 * np.cos(2 * x) * _s(1, y),
    ),
}

PROFILES = tuple(_CATALOG) + ("random",)


def _random(grid: GridSpec, seed: int):
    rng = np.random.default_rng(seed)
    X = 2 * np.pi * grid.x_nodes[:, None] / grid.period_L
    Y = grid.y_nodes[None, :]
    out = []
    for _ in range(2):
        f = np.zeros((grid.nx, grid.ny))
        for kx in range(1, 5):
            for ny in (1, 2):
                amp = rng.normal(size=2) * np.exp(-kx) / ny
                f += (amp[0] * np.cos(kx * X) + amp[1] * np.sin(kx * X)) * _s(ny, Y)
        out.append(f)
    return out


def initial_fields(profile: str, delta: float, grid: GridSpec, seed: int = 0):
    """(u_0, b_0), x-mean free and with exactly zero trapezoid y-mean per mode."""
    if profile == "random":
        u, b = _random(grid, seed)
    elif profile in _CATALOG:
        X, Y = np.meshgrid(2 * np.pi * grid.x_nodes / grid.period_L, grid.y_nodes, indexing="ij")
        u, b = _CATALOG[profile](X, Y)
    else:
        raise ConfigError(f"unknown profile {profile!r}; known: {', '.join(PROFILES)}")
    fu = SpectralField.from_physical(grid, delta * np.asarray(u, dtype=float))
    fb = SpectralField.from_physical(grid, delta * np.asarray(b, dtype=float))
    return (SpectralField(grid, project_zero_mean(fu.coeffs, grid)),
            SpectralField(grid, project_zero_mean(fb.coeffs, grid)))
