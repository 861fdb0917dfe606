"""Weighted eps-scaled anisotropic MHD system on the unit strip."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .analyticity import AnalyticityState, apply_weight, tau_rate
from .besov import pair_norm
from .grid import ConfigError, GridSpec, SpectralField, cumint, d2y
from .imex import ImexStepper, nonlinear_terms, recover_c, recover_v
from .limit import wall_traces
from .profiles import initial_fields
from .state import MhdState


class OutsideTheory(UserWarning):
    """Initial data violate the smallness condition."""


@dataclass(frozen=True)
class EpsilonConfig:
    epsilon: float
    grid: GridSpec = GridSpec()
    dt: float = 1e-3
    a: float = 0.5
    lam: float = 4.0
    nonlinear: bool = True
    magnetic: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon}")


def _full_dy(f: np.ndarray, h: float) -> np.ndarray:
    """Second-order d_y on all ny+2 nodes (one-sided at the walls)."""
    d = np.empty_like(f)
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2 * h)
    d[..., 0] = (-3 * f[..., 0] + 4 * f[..., 1] - f[..., 2]) / (2 * h)
    d[..., -1] = (3 * f[..., -1] - 4 * f[..., -2] + f[..., -3]) / (2 * h)
    return d


def pressure_solve(eps: float, rhs_u: np.ndarray, rhs_v: np.ndarray, grid: GridSpec) -> SpectralField:
    """Solve (d_x^2 + eps^-2 d_y^2) p = d_x rhs_u + eps^-2 d_y rhs_v with d_y p = rhs_v on the walls.

    ``rhs_u`` and ``rhs_v`` are coefficient arrays on all ny+2 nodes (walls
    included). Ghost-point Neumann closure, second order; at k = 0 one row is
    replaced by the trapezoid-mean gauge. Returns p on the interior nodes.
    """
    if not eps > 0:
        raise ConfigError("epsilon must be positive")
    n = grid.ny + 2
    h = grid.h
    k = grid.k
    ie2 = eps**-2
    rhs = 1j * k[:, None] * rhs_u + ie2 * _full_dy(rhs_v, h)
    base = np.zeros((n, n))
    idx = np.arange(n)
    base[idx, idx] = -2.0
    base[idx[1:], idx[:-1]] = 1.0
    base[idx[:-1], idx[1:]] = 1.0
    # ghosts p_{-1} = p_1 - 2h g_0 and p_{n} = p_{n-2} + 2h g_1
    base[0, 1] = 2.0
    base[-1, -2] = 2.0
    A = ie2 * base[None] / h**2 - (k**2)[:, None, None] * np.eye(n)[None]
    A = np.array(A)
    b = rhs.copy()
    b[:, 0] += ie2 * 2 * rhs_v[:, 0] / h
    b[:, -1] -= ie2 * 2 * rhs_v[:, -1] / h
    w = np.full(n, h)
    w[[0, -1]] = 0.5 * h
    A[0, 0] = w
    b[0, 0] = 0.0
    sol = np.linalg.solve(A, b[..., None])[..., 0]
    sol[grid.nx // 2] = 0
    return SpectralField(grid, sol[:, 1:-1])


def scaled_pressure(state: MhdState, eps: float, an: AnalyticityState) -> SpectralField:
    """Weighted 2D pressure of a scaled state, recovered from its explicit terms."""
    g = state.grid
    h = g.h
    k = g.k[:, None]
    rate = tau_rate(state.u, state.v, eps)
    N = nonlinear_terms(state.u.coeffs, state.b.coeffs, an.radius, g, with_vertical=True)
    damp = an.lam * rate * g.kabs[:, None]
    u, v = state.u.coeffs, state.v.coeffs

    def interior(f, Nf):
        return Nf + d2y(f, h) - eps**2 * k**2 * f - damp * f

    ru = interior(u, N["u"])
    rv = eps**2 * interior(v, N["v"])
    bot, top = wall_traces(u, h)
    # on the walls u = v = 0, so R_v = eps^2 d_y^2 v = -eps^2 i k d_y u
    full_u = np.zeros((g.nx, g.ny + 2), dtype=complex)
    full_v = np.zeros_like(full_u)
    full_u[:, 1:-1] = ru
    full_u[:, 0] = 2 * ru[:, 0] - ru[:, 1]
    full_u[:, -1] = 2 * ru[:, -1] - ru[:, -2]
    full_v[:, 1:-1] = rv
    full_v[:, 0] = -(eps**2) * 1j * g.k * bot
    full_v[:, -1] = -(eps**2) * 1j * g.k * top
    return pressure_solve(eps, full_u, full_v, g)


def make_stepper(grid, dt, eps, nonlinear=True, magnetic=True, forcing=None) -> ImexStepper:
    return ImexStepper(grid, dt, float(eps), nonlinear, magnetic, forcing)


def step_scaled(state: MhdState, dt: float, eps: float, analyticity: AnalyticityState,
                stepper: ImexStepper | None = None) -> MhdState:
    """One CN/AB2 step of the scaled system (``eps = 0`` gives the limit scheme)."""
    if stepper is None:
        stepper = make_stepper(state.grid, dt, eps)
    elif stepper.eps is None or abs(stepper.eps - eps) > 0 or abs(stepper.dt - dt) > 1e-15 * dt:
        raise ValueError("stepper was built for different (eps, dt)")
    return stepper.step(state, analyticity)


def weighted_state(u0: SpectralField, b0: SpectralField, a: float, flavor: str) -> MhdState:
    u = apply_weight(u0, a)
    b = apply_weight(b0, a)
    z = SpectralField.zeros(u.grid)
    return MhdState(0.0, u, recover_v(u), b, recover_c(b), z, flavor)


def smallness(u_w: SpectralField, v_w, b_w, c_w, eps: float) -> float:
    """||(u_0, eps v_0)||_{B^1/2} + ||(b_0, eps c_0)||_{B^1/2} of weighted data."""
    return pair_norm([u_w, v_w], 0.5, scales=[1, eps]) + pair_norm([b_w, c_w], 0.5, scales=[1, eps])


def make_scaled_initial_data(profile: str, delta: float, eps: float, grid: GridSpec = GridSpec(),
                             a: float = 0.5, C: float = 1.0, seed: int = 0):
    """Weighted initial state and a report of the smallness condition (threshold a / (2 C^2))."""
    if not 0 <= eps <= 1:
        raise ConfigError(f"epsilon must lie in [0, 1], got {eps}")
    u0, b0 = initial_fields(profile, delta, grid, seed)
    state = weighted_state(u0, b0, a, "scaled")
    size = smallness(state.u, state.v, state.b, state.c, eps)
    threshold = a / (2 * C**2)
    info = {"data_norm": size, "threshold": threshold, "outside_theory": size > threshold}
    if info["outside_theory"]:
        warnings.warn(f"outside-theory: data norm {size:.3e} > {threshold:.3e}", OutsideTheory)
    return state, info
