"""IMEX (Crank-Nicolson / Adams-Bashforth-2) stepping shared by both systems.

Both systems evolve the weighted horizontal components (u_phi, b_phi). The
vertical components are slaved to them through the discrete divergence
constraint, v = -i k \\int_0^y u, so that ``d_x u + d_y v = 0`` holds to
roundoff and v vanishes on both walls as soon as the trapezoid y-mean of u is
zero. That mean constraint is carried by a y-independent Lagrange multiplier:
for u it is the horizontal pressure gradient, for b the wall flux
``d_y b(1) - d_y b(0)`` (zero for smooth solutions).

Per horizontal mode k the scaled system reads, in weak form with test
functions (w, G w), G = -i k Q (Q the cumulative trapezoid):

    M_k du/dt = K_k u - (eps^2 k^2 + lam*rate*|k|) M_k u + W N_u + eps^2 G^H W N_v - mu W 1

with M_k = W + eps^2 G^H W G and K_k = W D2 + eps^2 G^H W D2 G. At eps = 0 this
is the limit system and the matrices are tridiagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analyticity import AnalyticityState, advance_radius, tau_rate, theta_rate
from .grid import (
    GridSpec,
    SpectralField,
    ValidationError,
    cumint,
    d2y,
    dy_center,
    from_padded_physical,
    to_padded_physical,
    y_integral,
)
from .state import MhdState

TOL_DIV = 1e-10


class RadiusExhausted(RuntimeError):
    """The analyticity radius a - lambda*theta reached zero."""


class Diverged(RuntimeError):
    """Non-finite values appeared; ``last_state`` is the last healthy state."""

    def __init__(self, msg, last_state=None):
        super().__init__(msg)
        self.last_state = last_state


# ------------------------------------------------------------- constraints


def _recover(f: SpectralField, name: str, tol: float) -> SpectralField:
    g = f.grid
    top = np.abs(1j * g.k * y_integral(f.coeffs, g.h))
    scale = 1.0 + f.max_abs()
    if top.max() > tol * scale:
        raise ValidationError(
            f"compatibility violated: ||{name}(., 1)|| = {top.max():.3e} "
            f"(integral over y of the horizontal component must vanish)"
        )
    return SpectralField(g, -1j * g.k[:, None] * cumint(f.coeffs, g.h))


def recover_v(u: SpectralField, tol: float = TOL_DIV) -> SpectralField:
    """v = -int_0^y d_x u (cumulative trapezoid)."""
    return _recover(u, "v", tol)


def recover_c(b: SpectralField, tol: float = TOL_DIV) -> SpectralField:
    """c = -int_0^y d_x b (cumulative trapezoid)."""
    return _recover(b, "c", tol)


def divergence_residual(hor: SpectralField, ver: SpectralField) -> float:
    """max |d_x f + d_y g| on cell midpoints (walls included), trapezoid-consistent."""
    g = hor.grid
    z = np.zeros((g.nx, 1), dtype=complex)
    hp = np.concatenate([z, hor.coeffs, z], axis=1)
    vp = np.concatenate([z, ver.coeffs, z], axis=1)
    res = (vp[:, 1:] - vp[:, :-1]) / g.h + 1j * g.k[:, None] * 0.5 * (hp[:, 1:] + hp[:, :-1])
    return float(np.max(np.abs(res)))


def project_zero_mean(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Remove the k = 0 column, the Nyquist column and the trapezoid y-mean of every mode."""
    y = grid.y_nodes
    prof = 6 * y * (1 - y)
    out = c - np.outer(y_integral(c, grid.h) / y_integral(prof, grid.h), prof)
    out[0] = 0
    out[grid.nx // 2] = 0
    return out


# ------------------------------------------------------------ nonlinear terms

# (target equation, sign, (left factor, right factor))
TERMS = {
    "u": [(-1, "u", "dx_u"), (-1, "v", "dy_u"), (1, "b", "dx_b"), (1, "c", "dy_b")],
    "b": [(-1, "u", "dx_b"), (-1, "v", "dy_b"), (1, "b", "dx_u"), (1, "c", "dy_u")],
    "v": [(-1, "u", "dx_v"), (-1, "v", "dy_v"), (1, "b", "dx_c"), (1, "c", "dy_c")],
    "c": [(-1, "u", "dx_c"), (-1, "v", "dy_c"), (1, "b", "dx_v"), (1, "c", "dy_v")],
}


def term_name(left: str, right: str) -> str:
    return f"{left}*{right}"


def nonlinear_terms(
    u_w: np.ndarray, b_w: np.ndarray, radius: float, grid: GridSpec,
    with_vertical: bool = False, magnetic: bool = True, parts: bool = False,
) -> dict[str, np.ndarray]:
    """Weighted nonlinear terms (products formed on unweighted fields, then reweighted).

    Returns N_u, N_b (and N_v, N_c if ``with_vertical``) as coefficient arrays.
    With ``parts`` the individual products such as ``"v*dy_u"`` are returned too.
    """
    k = grid.k[:, None]
    h = grid.h
    down = np.exp(-radius * grid.kabs)[:, None]
    up = np.exp(radius * grid.kabs)[:, None]
    u = u_w * down
    b = b_w * down
    v = -1j * k * cumint(u, h)
    c = -1j * k * cumint(b, h)
    spec = {
        "u": u, "v": v, "b": b, "c": c,
        "dx_u": 1j * k * u, "dy_u": dy_center(u, h),
        "dx_b": 1j * k * b, "dy_b": dy_center(b, h),
    }
    # d_y v = -d_x u and d_y c = -d_x b exactly in the continuum
    if with_vertical:
        spec.update({
            "dx_v": 1j * k * v, "dy_v": -spec["dx_u"],
            "dx_c": 1j * k * c, "dy_c": -spec["dx_b"],
        })
    eqs = ["u", "b"] + (["v", "c"] if with_vertical else [])
    phys: dict[str, np.ndarray] = {}

    def P(name):
        if name not in phys:
            phys[name] = to_padded_physical(spec[name], grid)
        return phys[name]

    # Each product is transformed on its own and the sums are formed in
    # spectral space, so that budgets recomputed from individual products
    # reproduce the stepped right-hand side to roundoff.
    out: dict[str, np.ndarray] = {}
    for eq in eqs:
        total = np.zeros_like(u_w)
        for sign, left, right in TERMS[eq]:
            if not magnetic and (left in ("b", "c") or (eq in ("u", "v") and sign > 0)):
                continue
            prod = from_padded_physical(P(left) * P(right), grid) * up
            if parts:
                out[term_name(left, right)] = prod
            total = total + sign * prod
        out[eq] = total
    for key in out:
        out[key][grid.nx // 2] = 0
    return out


# ----------------------------------------------------------- linear algebra


def thomas(lower, diag, upper, rhs):
    """Batched tridiagonal solve; arrays of shape (nk, n), rhs (nk, n, m)."""
    n = diag.shape[1]
    cp = np.empty_like(diag)
    dp = np.empty(rhs.shape, dtype=np.result_type(rhs, diag))
    cp[:, 0] = upper[:, 0] / diag[:, 0]
    dp[:, 0] = rhs[:, 0] / diag[:, 0, None]
    for i in range(1, n):
        den = diag[:, i] - lower[:, i] * cp[:, i - 1]
        cp[:, i] = upper[:, i] / den
        dp[:, i] = (rhs[:, i] - lower[:, i, None] * dp[:, i - 1]) / den[:, None]
    x = np.empty_like(dp)
    x[:, -1] = dp[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = dp[:, i] - cp[:, i, None] * x[:, i + 1]
    return x


def cumint_matrix(grid: GridSpec) -> np.ndarray:
    return cumint(np.eye(grid.ny), grid.h).T


def d2_matrix(grid: GridSpec) -> np.ndarray:
    return d2y(np.eye(grid.ny), grid.h).T


@dataclass
class StepperConfig:
    dt: float
    eps: float | None = None  # None: limit system
    nonlinear: bool = True
    magnetic: bool = True


class ImexStepper:
    """Owns the AB2 history and the per-mode operators of one run."""

    def __init__(self, grid: GridSpec, dt: float, eps: float | None = None,
                 nonlinear: bool = True, magnetic: bool = True,
                 forcing: Callable[[float], dict] | None = None):
        if not dt > 0:
            raise ValidationError("dt must be positive")
        if eps is not None and eps < 0:
            raise ValidationError("epsilon must be >= 0")
        self.grid = grid
        self.dt = dt
        self.eps = eps
        self.nonlinear = nonlinear
        self.magnetic = magnetic
        self.forcing = forcing
        self.prev: dict | None = None
        self.last_rate = 0.0
        self.last_multipliers: dict[str, np.ndarray] = {}
        self.last_terms: dict | None = None
        k2 = grid.k**2
        # k = 0 is evolved too; its multiplier is a mean pressure gradient
        self._active = grid.nyquist_mask.copy()
        if eps is not None:
            Q = cumint_matrix(grid)
            D2 = d2_matrix(grid)
            h = grid.h
            QWQ = h * Q.T @ Q
            QWD2Q = h * Q.T @ D2 @ Q
            e2 = eps**2
            self._M = h * np.eye(grid.ny)[None] + e2 * k2[:, None, None] * QWQ[None]
            self._K = h * D2[None] + e2 * k2[:, None, None] * QWD2Q[None]
            self._Q = Q

    @property
    def flavor(self) -> str:
        return "limit" if self.eps is None else "scaled"

    def rate(self, state: MhdState) -> float:
        if self.eps is None:
            return theta_rate(state.u, state.b)
        return tau_rate(state.u, state.v, self.eps)

    def explicit_terms(self, state: MhdState, radius: float) -> dict:
        g = self.grid
        vert = bool(self.eps)
        if self.nonlinear:
            return nonlinear_terms(state.u.coeffs, state.b.coeffs, radius, g,
                                   with_vertical=vert, magnetic=self.magnetic)
        z = np.zeros((g.nx, g.ny), dtype=complex)
        return {k: z for k in (("u", "b", "v", "c") if vert else ("u", "b"))}

    def step(self, state: MhdState, an: AnalyticityState) -> MhdState:
        if not an.healthy:
            raise RadiusExhausted(f"radius exhausted at t = {an.time:.6g}")
        g = self.grid
        dt = self.dt
        rate = self.rate(state)
        radius = an.radius
        N = self.explicit_terms(state, radius)
        if self.prev is None:
            ext = N
        else:
            ext = {k: 1.5 * N[k] - 0.5 * self.prev[k] for k in N}
        self.prev = N
        self.last_rate = rate
        if self.forcing is not None:
            F = self.forcing(state.time + 0.5 * dt)
            ext = {k: ext[k] + F.get(k, 0) for k in ext}
        self.last_terms = ext
        damp = an.lam * rate * g.kabs
        if self.eps is None:
            u_new, mu_u = self._solve_limit(state.u.coeffs, ext["u"], damp)
            b_new, mu_b = self._solve_limit(state.b.coeffs, ext["b"], damp)
        else:
            u_new, b_new, mu_u, mu_b = self._solve_scaled(state, ext, damp)
        if not self.magnetic:
            b_new = np.zeros_like(b_new)
            mu_b = np.zeros_like(mu_b)
        self.last_multipliers = {"u": mu_u, "b": mu_b}
        advance_radius(an, rate, dt)
        u = SpectralField(g, u_new)
        b = SpectralField(g, b_new)
        # v, c are slaved to u, b; compatibility holds to roundoff by construction
        v = SpectralField(g, -1j * g.k[:, None] * cumint(u_new, g.h))
        c = SpectralField(g, -1j * g.k[:, None] * cumint(b_new, g.h))
        p = np.zeros((g.nx, g.ny), dtype=complex)
        if self.eps is None:
            # limit flavor: the multiplier is d_x p itself (y-independent)
            nz = self._active & (g.k != 0)
            p[nz] = (mu_u[nz] / (1j * g.k[nz]))[:, None]
        new = MhdState(state.time + dt, u, v, b, c, SpectralField(g, p), self.flavor)
        if not new.is_finite():
            raise Diverged(f"non-finite values at t = {new.time:.6g}", state)
        if not an.healthy:
            raise RadiusExhausted(f"radius exhausted at t = {an.time:.6g}")
        return new

    # -- limit: tridiagonal per mode, bordered by the mean constraint
    def _solve_limit(self, cur, ext, damp):
        g = self.grid
        dt, h = self.dt, g.h
        act = self._active
        nk, n = int(act.sum()), g.ny
        alpha = 1.0 + 0.5 * dt * damp[act]
        beta = 1.0 - 0.5 * dt * damp[act]
        off = -0.5 * dt / h**2
        diag = np.broadcast_to((alpha + dt / h**2)[:, None], (nk, n))
        lower = np.full((nk, n), off)
        upper = np.full((nk, n), off)
        rhs = beta[:, None] * cur[act] + 0.5 * dt * d2y(cur[act], h) + dt * ext[act]
        sol = thomas(lower, diag, upper, np.stack([rhs, np.ones((nk, n))], axis=-1))
        x, z = sol[..., 0], sol[..., 1]
        dmu = x.sum(axis=1) / z.sum(axis=1).real
        out = np.zeros_like(cur)
        out[act] = x - dmu[:, None] * z
        mu = np.zeros(g.nx, dtype=complex)
        mu[act] = dmu / dt
        return out, mu

    # -- scaled: dense per mode (the eps^2 G^H W G coupling is global in y)
    def _solve_scaled(self, state, ext, damp):
        g = self.grid
        dt, h, n = self.dt, g.h, g.ny
        act = self._active
        e2 = self.eps**2
        kk = g.k[act]
        M = self._M[act]
        K = self._K[act]
        shift = (e2 * kk**2 + damp[act])[:, None, None]
        A = K - shift * M
        lhs = M - 0.5 * dt * A
        rmat = M + 0.5 * dt * A
        QT = self._Q.T

        def force(ext_h, ext_v):
            f = h * ext_h[act]
            if e2 and ext_v is not None:
                f = f + e2 * (1j * kk)[:, None] * (h * ext_v[act] @ QT.T)
            return f

        cols = []
        for name, vname in (("u", "v"), ("b", "c")):
            cur = getattr(state, name).coeffs[act]
            r = np.einsum("kij,kj->ki", rmat, cur) + dt * force(ext[name], ext.get(vname))
            cols.append(r)
        nk = len(kk)
        big = np.zeros((nk, n + 1, n + 1))
        big[:, :n, :n] = lhs
        big[:, :n, n] = dt * h
        big[:, n, :n] = h
        rhs = np.zeros((nk, n + 1, 4))
        for i, r in enumerate(cols):
            rhs[:, :n, 2 * i] = r.real
            rhs[:, :n, 2 * i + 1] = r.imag
        sol = np.linalg.solve(big, rhs)
        res = []
        mus = []
        for i in range(2):
            z = sol[..., 2 * i] + 1j * sol[..., 2 * i + 1]
            full = np.zeros((g.nx, n), dtype=complex)
            full[act] = z[:, :n]
            mu = np.zeros(g.nx, dtype=complex)
            mu[act] = z[:, n]
            res.append(full)
            mus.append(mu)
        return res[0], res[1], mus[0], mus[1]


def stable_dt(state: MhdState, radius: float, cfl: float = 0.5) -> float:
    """Advective bound cfl / (k_max |u|_inf + |v|_inf / dy + 1); diffusion is implicit."""
    g = state.grid
    down = np.exp(-radius * g.kabs)[:, None]
    u = SpectralField(g, state.u.coeffs * down).to_physical()
    v = SpectralField(g, state.v.coeffs * down).to_physical()
    return cfl / (g.k_max * np.abs(u).max() + np.abs(v).max() / g.h + 1.0)
