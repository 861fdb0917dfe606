"""Weighted hydrostatic limit system: public operations."""

from __future__ import annotations

import numpy as np

from .analyticity import AnalyticityState
from .grid import SpectralField, dealiased_product, y_integral
from .imex import (  # noqa: F401  (re-exported)
    Diverged,
    ImexStepper,
    RadiusExhausted,
    divergence_residual,
    recover_c,
    recover_v,
    stable_dt,
)
from .state import MhdState


def wall_traces(c: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Second-order one-sided d_y f at y = 0 and y = 1 (wall values are zero)."""
    bottom = (4 * c[..., 0] - c[..., 1]) / (2 * h)
    top = (c[..., -2] - 4 * c[..., -1]) / (2 * h)
    return bottom, top


def pressure_gradient(u: SpectralField, b: SpectralField, quadratic_factor: float = 1.0) -> SpectralField:
    """d_x p = [d_y u]_0^1 - f d_x int u^2 dy + f d_x int b^2 dy (x-only, returned constant in y).

    Integrating the u-equation across the strip with the mean constraint gives
    f = 1; the argument exists so that other normalizations can be evaluated.
    """
    g = u.grid
    g.check_same(b.grid)
    bot, top = wall_traces(u.coeffs, g.h)
    uu = y_integral(dealiased_product(u.coeffs, u.coeffs, g), g.h)
    bb = y_integral(dealiased_product(b.coeffs, b.coeffs, g), g.h)
    dpx = (top - bot) + quadratic_factor * 1j * g.k * (bb - uu)
    dpx[g.nx // 2] = 0
    return SpectralField(g, np.repeat(dpx[:, None], g.ny, axis=1))


def pressure_from_gradient(dpx: SpectralField) -> SpectralField:
    g = dpx.grid
    p = np.zeros_like(dpx.coeffs)
    nz = g.k != 0
    p[nz] = dpx.coeffs[nz] / (1j * g.k[nz, None])
    p[g.nx // 2] = 0
    return SpectralField(g, p)


def make_stepper(grid, dt, nonlinear=True, magnetic=True, forcing=None) -> ImexStepper:
    return ImexStepper(grid, dt, None, nonlinear, magnetic, forcing)


def step_limit(state: MhdState, dt: float, analyticity: AnalyticityState,
               stepper: ImexStepper | None = None) -> MhdState:
    """One CN/AB2 step; pass a persistent ``stepper`` to keep the AB2 history (else Euler)."""
    if stepper is None:
        stepper = make_stepper(state.grid, dt)
    elif stepper.eps is not None:
        raise ValueError("stepper was built for the scaled system")
    elif abs(stepper.dt - dt) > 1e-15 * dt:
        raise ValueError("dt differs from the stepper's dt")
    return stepper.step(state, analyticity)


def make_limit_initial_data(profile: str, delta: float, grid, a: float = 0.5, seed: int = 0) -> MhdState:
    from .profiles import initial_fields
    from .scaled import weighted_state

    u0, b0 = initial_fields(profile, delta, grid, seed)
    return weighted_state(u0, b0, a, "limit")
