"""Analytic weight e^{(a - lambda*theta(t))|D_x|} and the radius-loss ODEs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .besov import besov_norm, blocks_from_energy
from .grid import SpectralField, ValidationError, mode_energy, mode_grad_energy
from .lp import build_partition

MAX_EXPONENT = 700.0


def apply_weight(f: SpectralField, radius: float, sign: int = 1) -> SpectralField:
    """Multiply coefficients by exp(sign * radius * |k|)."""
    if radius < 0:
        raise ValidationError(f"radius must be >= 0, got {radius}")
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    if radius * f.grid.k_max > MAX_EXPONENT:
        raise ValidationError("radius too large for grid")
    mult = np.exp(sign * radius * f.grid.kabs)
    return SpectralField(f.grid, f.coeffs * mult[:, None])


def theta_rate(u_w: SpectralField, b_w: SpectralField) -> float:
    """||d_y u_phi||_{B^1/2} + ||d_y b_phi||_{B^1/2}."""
    return besov_norm(u_w, 0.5, dy=True) + besov_norm(b_w, 0.5, dy=True)


def tau_rate(u_w: SpectralField, v_w: SpectralField, eps: float) -> float:
    """||d_y u_phi||_{B^1/2} + eps ||d_y v_phi||_{B^1/2}."""
    out = besov_norm(u_w, 0.5, dy=True)
    if eps:
        out += eps * besov_norm(v_w, 0.5, dy=True)
    return out


def eta_rate(
    u_scaled_w: SpectralField, u_limit_w: SpectralField, eps: float,
    t_scaled: float | None = None, t_limit: float | None = None, dt: float | None = None,
) -> float:
    """Integrand of eta: ||(d_y u^eps_phi, eps d_x u^eps_phi)|| + ||d_y u_phi|| in B^1/2."""
    if t_scaled is not None and t_limit is not None:
        tol = dt if dt is not None else 0.0
        if abs(t_scaled - t_limit) > tol + 1e-12:
            raise ValueError(f"time misalignment {t_scaled} vs {t_limit}")
    g = u_scaled_w.grid
    e = mode_grad_energy(u_scaled_w.coeffs, g.h) + eps**2 * g.kabs**2 * mode_energy(u_scaled_w.coeffs, g.h)
    pair = blocks_from_energy(e, 0.5, build_partition(g)).sum()
    return float(pair + besov_norm(u_limit_w, 0.5, dy=True))


@dataclass
class AnalyticityState:
    """Radius bookkeeping for one run: radius(t) = a - lam * theta(t)."""

    a: float
    lam: float
    theta: float = 0.0
    time: float = 0.0
    healthy: bool = True
    label: str = "theta"
    history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if not self.a > 0:
            raise ValidationError(f"a must be positive, got {self.a}")
        if self.lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if not self.history:
            self.history.append(self._record(0.0))

    @property
    def radius(self) -> float:
        return self.a - self.lam * self.theta

    @property
    def persistent(self) -> bool:
        return self.lam == 0 or self.theta <= self.a / self.lam

    def _record(self, rate: float) -> dict:
        return {
            "time": self.time,
            self.label: self.theta,
            f"{self.label}_rate": rate,
            "radius_remaining": self.radius,
        }

    def copy(self) -> "AnalyticityState":
        return AnalyticityState(
            self.a, self.lam, self.theta, self.time, self.healthy, self.label,
            [dict(h) for h in self.history],
        )


def advance_radius(state: AnalyticityState, rate: float, dt: float) -> AnalyticityState:
    """Explicit Euler step of theta' = rate (in place; returns the state)."""
    if rate < 0:
        raise ValidationError(f"rate must be >= 0, got {rate}")
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    # the rate that was applied over [t, t+dt] is attached to the step start
    state.history[-1][f"{state.label}_rate"] = rate
    state.theta += dt * rate
    state.time += dt
    if state.radius <= 0:
        state.healthy = False
    state.history.append(state._record(rate))
    return state
