"""Horizontal Littlewood-Paley blocks, Bony paraproducts and Bernstein ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    ConfigError,
    GridSpec,
    SpectralField,
    dealiased_product,
    l2_norm,
    mode_energy,
)

# psi == 1 on [0, LOW_EDGE], psi == 0 on [HIGH_EDGE, inf)
LOW_EDGE = 0.75
HIGH_EDGE = 4.0 / 3.0


def _flat(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity transition: 0 for t <= 0, 1 for t >= 1."""
    a = _flat(t)
    b = _flat(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def psi(z):
    z = np.abs(np.asarray(z, dtype=float))
    return smooth_step((HIGH_EDGE - z) / (HIGH_EDGE - LOW_EDGE))


def phi(z):
    """Dyadic bump, supported in 3/4 <= |z| <= 8/3."""
    return psi(np.asarray(z, dtype=float) / 2) - psi(z)


def default_q_range(grid: GridSpec) -> tuple[int, int]:
    return -2, math.ceil(math.log2(grid.k_max)) + 2


@dataclass(frozen=True)
class Partition:
    """Tabulated cutoffs on a grid: ``weights[i, k] = phi(2^-q |k|)`` for q = q_min + i."""

    grid: GridSpec
    q_min: int
    q_max: int
    weights: np.ndarray
    low: np.ndarray  # psi(2^-q_min |k|), carries k = 0

    @property
    def qs(self) -> np.ndarray:
        return np.arange(self.q_min, self.q_max + 1)

    def block_weight(self, q: int) -> np.ndarray:
        return self.weights[q - self.q_min]


_partition_cache: dict = {}


def build_partition(grid: GridSpec, q_range: tuple[int, int] | None = None) -> Partition:
    q_min, q_max = q_range if q_range is not None else default_q_range(grid)
    key = (grid, q_min, q_max)
    if key in _partition_cache:
        return _partition_cache[key]
    kabs = grid.kabs
    qs = np.arange(q_min, q_max + 1)
    w = np.array([phi(2.0 ** (-q) * kabs) for q in qs])
    total = w.sum(axis=0)
    nonzero = kabs > 0
    bad = nonzero & (np.abs(total - 1.0) > 1e-12)
    if np.any(bad):
        kk = kabs[bad][0]
        raise ConfigError(
            f"q_range [{q_min}, {q_max}] does not cover wavenumber |k| = {kk:g}"
        )
    w.setflags(write=False)
    low = psi(2.0 ** (-q_min) * kabs)
    low.setflags(write=False)
    part = Partition(grid, q_min, q_max, w, low)
    _partition_cache[key] = part
    return part


@dataclass
class DyadicLadder:
    blocks: dict[int, SpectralField]
    low_part: SpectralField
    q_range: tuple[int, int]

    def reconstruct(self) -> SpectralField:
        out = self.low_part.copy()
        for blk in self.blocks.values():
            out = out + blk
        return out


def dyadic_decompose(f: SpectralField, partition: Partition | None = None) -> DyadicLadder:
    part = partition or build_partition(f.grid)
    blocks = {
        int(q): SpectralField(f.grid, f.coeffs * part.block_weight(q)[:, None])
        for q in part.qs
    }
    low = SpectralField(f.grid, f.coeffs * part.low[:, None])
    return DyadicLadder(blocks, low, (part.q_min, part.q_max))


def block_norms(f: SpectralField, partition: Partition | None = None) -> np.ndarray:
    """L2 norms of every block, in q order."""
    part = partition or build_partition(f.grid)
    return block_norms_from_energy(mode_energy(f.coeffs, f.grid.h), part)


def block_norms_from_energy(e: np.ndarray, part: Partition) -> np.ndarray:
    """Block L2 norms from per-mode energies ``e`` (shape (..., nx))."""
    return np.sqrt(part.grid.period_L * (e @ (part.weights.T**2)))


def bony_decompose(f: SpectralField, g: SpectralField, partition: Partition | None = None):
    """Return (T_f g, T_g f, R(f, g)); their sum is the de-aliased product f*g."""
    f.grid.check_same(g.grid)
    grid = f.grid
    part = partition or build_partition(grid)
    # The low part is the lowest rung, indexed q_min - 1.
    fb = [f.coeffs * part.low[:, None]] + [f.coeffs * w[:, None] for w in part.weights]
    gb = [g.coeffs * part.low[:, None]] + [g.coeffs * w[:, None] for w in part.weights]
    n = len(fb)
    zero = np.zeros_like(f.coeffs)

    def partial_sums(blocks):
        # S[i] = sum of rungs strictly below i - 1
        acc = [zero]
        for i in range(1, n):
            acc.append(acc[-1] + (blocks[i - 2] if i >= 2 else zero))
        return acc

    sf, sg = partial_sums(fb), partial_sums(gb)
    tfg = np.zeros_like(zero)
    tgf = np.zeros_like(zero)
    rem = np.zeros_like(zero)
    for i in range(n):
        if np.any(sf[i]) and np.any(gb[i]):
            tfg += dealiased_product(sf[i], gb[i], grid)
        if np.any(sg[i]) and np.any(fb[i]):
            tgf += dealiased_product(sg[i], fb[i], grid)
        near = sum(fb[j] for j in range(max(0, i - 1), min(n, i + 2)))
        if np.any(near) and np.any(gb[i]):
            rem += dealiased_product(near, gb[i], grid)
    return (
        SpectralField(grid, tfg),
        SpectralField(grid, tgf),
        SpectralField(grid, rem),
    )


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    f.grid.check_same(g.grid)
    return SpectralField(f.grid, dealiased_product(f.coeffs, g.coeffs, f.grid))


BERNSTEIN_C = 8.0


@dataclass
class BernsteinReport:
    q: int
    vacuous: bool
    derivative_ratio: float | None = None
    linf_ratio: float | None = None  # sup_x ||f(x, .)||_{L2_y} / (2^{q/2} ||f||_{L2})
    linf_vertical_ratio: float | None = None  # ||f||_{L2_x(Linf_y)} / (2^{q/2} ||f||), reported only
    ok: bool = True


def bernstein_check(f: SpectralField, q: int, C: float = BERNSTEIN_C) -> BernsteinReport:
    """Bernstein ratios for a field already localized to block q."""
    grid = f.grid
    n0 = l2_norm(f)
    if n0 == 0.0:
        return BernsteinReport(q, vacuous=True)
    dx = SpectralField(grid, 1j * grid.k[:, None] * f.coeffs)
    ratio = l2_norm(dx) / (2.0**q * n0)
    phys = f.to_physical()
    col = np.sqrt(grid.h * np.sum(phys**2, axis=1))
    linf = col.max() / (2.0 ** (q / 2) * n0)
    vert = np.sqrt(grid.period_L / grid.nx * np.sum(np.max(np.abs(phys), axis=1) ** 2))
    vert_ratio = vert / (2.0 ** (q / 2) * n0)
    ok = (1.0 / C <= ratio <= C) and (linf <= C)
    return BernsteinReport(q, False, ratio, linf, vert_ratio, ok)
