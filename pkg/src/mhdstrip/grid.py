"""Strip discretization: horizontal Fourier modes times a uniform wall-normal grid.

Coefficients are stored in numpy FFT order along axis 0 with the convention
``f(x, y_j) = sum_k c[k, j] exp(i k x)``, i.e. ``c = fft(f, axis=0) / nx``.
Wall values (y = 0 and y = 1) are implicit zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ConfigError(ValueError):
    """Invalid discretization or run configuration."""


class ValidationError(ValueError):
    """A field or parameter violates a documented precondition."""


@dataclass(frozen=True)
class GridSpec:
    period_L: float = 2 * np.pi
    nx: int = 64
    ny: int = 32

    def __post_init__(self):
        if self.nx < 16 or self.nx & (self.nx - 1):
            raise ConfigError(f"nx must be a power of two >= 16, got {self.nx}")
        if self.ny < 4:
            raise ConfigError(f"ny must be >= 4, got {self.ny}")
        if not self.period_L > 0:
            raise ConfigError(f"period_L must be positive, got {self.period_L}")

    @property
    def h(self) -> float:
        return 1.0 / (self.ny + 1)

    @cached_property
    def y_nodes(self) -> np.ndarray:
        return np.arange(1, self.ny + 1) * self.h

    @cached_property
    def y_full(self) -> np.ndarray:
        """Nodes including both walls."""
        return np.arange(self.ny + 2) * self.h

    @cached_property
    def x_nodes(self) -> np.ndarray:
        return np.arange(self.nx) * (self.period_L / self.nx)

    @cached_property
    def k(self) -> np.ndarray:
        # Nyquist stored at -nx/2 by numpy; its |k| is what matters and it is kept at zero.
        return np.fft.fftfreq(self.nx, d=1.0 / self.nx) * (2 * np.pi / self.period_L)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.abs(self.k)

    @property
    def k_max(self) -> float:
        return float(self.kabs.max())

    @property
    def k_min(self) -> float:
        return 2 * np.pi / self.period_L

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        m = np.ones(self.nx, dtype=bool)
        m[self.nx // 2] = False
        return m

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on the interior nodes (wall values are zero)."""
        return np.full(self.ny, self.h)

    @property
    def n_pad(self) -> int:
        return 3 * self.nx // 2

    def check_same(self, other: "GridSpec"):
        if self != other:
            raise ValueError(f"grid mismatch: {self} vs {other}")


@dataclass
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(
                f"coeff shape {self.coeffs.shape} != {(self.grid.nx, self.grid.ny)}"
            )

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros((grid.nx, grid.ny), dtype=complex))

    @classmethod
    def from_physical(cls, grid: GridSpec, values: np.ndarray) -> "SpectralField":
        return cls(grid, np.fft.fft(values, axis=0) / grid.nx)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "SpectralField":
        X, Y = np.meshgrid(grid.x_nodes, grid.y_nodes, indexing="ij")
        return cls.from_physical(grid, func(X, Y))

    def to_physical(self) -> np.ndarray:
        return np.fft.ifft(self.coeffs, axis=0).real * self.grid.nx

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other):
        self.grid.check_same(other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self.grid.check_same(other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, alpha):
        return SpectralField(self.grid, self.coeffs * alpha)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def hermitian_defect(self) -> float:
        c = self.coeffs
        mirror = np.conj(c[(-np.arange(self.grid.nx)) % self.grid.nx])
        return float(np.max(np.abs(c - mirror)))

    def mean_defect(self) -> float:
        """Largest |coefficient| in the k = 0 column."""
        return float(np.max(np.abs(self.coeffs[0])))


# ---------------------------------------------------------------- y operators
# All operators act on coefficient arrays of shape (..., ny) along the last axis.


def pad_walls(c: np.ndarray) -> np.ndarray:
    z = np.zeros(c.shape[:-1] + (1,), dtype=c.dtype)
    return np.concatenate([z, c, z], axis=-1)


def dy_center(c: np.ndarray, h: float) -> np.ndarray:
    """Second-order centred first derivative at interior nodes, zero walls."""
    p = pad_walls(c)
    return (p[..., 2:] - p[..., :-2]) / (2 * h)


def d2y(c: np.ndarray, h: float) -> np.ndarray:
    p = pad_walls(c)
    return (p[..., 2:] - 2 * p[..., 1:-1] + p[..., :-2]) / h**2


def dy_staggered(c: np.ndarray, h: float) -> np.ndarray:
    """Differences on the ny+1 cell midpoints, walls included."""
    p = pad_walls(c)
    return (p[..., 1:] - p[..., :-1]) / h


def cumint(c: np.ndarray, h: float) -> np.ndarray:
    """Cumulative trapezoid integral from y = 0 to each interior node."""
    p = pad_walls(c)
    seg = 0.5 * h * (p[..., 1:-1] + p[..., :-2])
    return np.cumsum(seg, axis=-1)


def y_integral(c: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid integral over (0, 1); walls contribute zero."""
    return h * c.sum(axis=-1)


def mode_energy(c: np.ndarray, h: float) -> np.ndarray:
    """Per-mode wall-normal L2 energy sum_j w_j |c_kj|^2."""
    return h * np.sum(np.abs(c) ** 2, axis=-1)


def mode_grad_energy(c: np.ndarray, h: float) -> np.ndarray:
    """Per-mode energy of the wall-normal derivative (staggered, walls included)."""
    return h * np.sum(np.abs(dy_staggered(c, h)) ** 2, axis=-1)


# ------------------------------------------------------------ x transforms


def to_padded_physical(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Physical values on the 3/2-padded x grid."""
    nx, m = grid.nx, grid.n_pad
    half = nx // 2
    big = np.zeros((m,) + c.shape[1:], dtype=complex)
    big[:half] = c[:half]
    big[m - half + 1 :] = c[half + 1 :]
    return np.fft.ifft(big, axis=0).real * m


def from_padded_physical(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    nx, m = grid.nx, grid.n_pad
    half = nx // 2
    big = np.fft.fft(f, axis=0) / m
    out = np.zeros((nx,) + f.shape[1:], dtype=complex)
    out[:half] = big[:half]
    out[half + 1 :] = big[m - half + 1 :]
    return out


def dealiased_product(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Coefficients of the product a*b with the 3/2 rule in x."""
    return from_padded_physical(
        to_padded_physical(a, grid) * to_padded_physical(b, grid), grid
    )


def l2_norm(f: SpectralField) -> float:
    """L2 norm over one horizontal period times (0, 1)."""
    g = f.grid
    return float(np.sqrt(g.period_L * mode_energy(f.coeffs, g.h).sum()))
