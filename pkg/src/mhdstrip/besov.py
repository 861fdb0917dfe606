"""Besov, Chemin-Lerner and time-weighted Chemin-Lerner norms.

Everything reduces to per-block L2 norms ``||Delta_q f||``; a time series of
those (shape (nt, nq)) is what the Chemin-Lerner aggregates consume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .grid import SpectralField, ValidationError, mode_energy, mode_grad_energy
from .lp import Partition, block_norms_from_energy, build_partition


def derivative_order(s: float) -> int:
    """Number of x-derivatives used for s in (k - 1/2, k + 1/2]."""
    return max(0, math.ceil(s - 0.5))


def besov_from_blocks(norms: np.ndarray, qs: np.ndarray, s: float) -> np.ndarray:
    return np.asarray(norms) @ (2.0 ** (s * qs.astype(float)))


def _energies(f: SpectralField, dy: bool, dx_order: int) -> np.ndarray:
    c = f.coeffs
    if dx_order:
        c = c * (1j * f.grid.k[:, None]) ** dx_order
    return mode_grad_energy(c, f.grid.h) if dy else mode_energy(c, f.grid.h)


def blocks_from_energy(
    e: np.ndarray, s: float, partition: Partition, dx: int = 0
) -> np.ndarray:
    """B^s blocks from per-mode energies (shape (..., nx)); ``dx`` extra x-derivatives."""
    kd = derivative_order(s)
    e = np.asarray(e) * partition.grid.kabs ** (2 * (kd + dx))
    return block_norms_from_energy(e, partition) * 2.0 ** ((s - kd) * partition.qs)


def besov_blocks(
    f: SpectralField, s: float, dy: bool = False, partition: Partition | None = None
) -> np.ndarray:
    """Per-block quantities 2^{q(s-k)} ||Delta_q d_x^k f|| whose q-sum is the B^s norm."""
    part = partition or build_partition(f.grid)
    kd = derivative_order(s)
    norms = block_norms_from_energy(_energies(f, dy, kd), part)
    return norms * 2.0 ** ((s - kd) * part.qs)


def besov_norm(
    f: SpectralField,
    s: float,
    dy: bool = False,
    require_zero_mean: bool = False,
    partition: Partition | None = None,
) -> float:
    """``sum_q 2^{qs} ||Delta_q f||_{L2}``; for s > 1/2 via ``d_x^k f in B^{s-k}``.

    ``dy=True`` evaluates the norm of the wall-normal derivative (staggered
    differences, walls included).
    """
    if not -2.0 <= s <= 3.0:
        raise ValidationError(f"s = {s} outside supported range [-2, 3]")
    if require_zero_mean and f.mean_defect() > 0:
        raise ValidationError(
            f"k = 0 column is nonzero (max {f.mean_defect():.3e}); zero mean required"
        )
    return float(besov_blocks(f, s, dy, partition).sum())


def pair_blocks(
    fields: Sequence[SpectralField], s: float, dy: bool = False, scales=None,
    partition: Partition | None = None,
) -> np.ndarray:
    """Blocks of a vector field (f_1, ..., f_m): 2^{qs} sqrt(sum_i ||Delta_q a_i f_i||^2)."""
    scales = [1.0] * len(fields) if scales is None else list(scales)
    sq = sum((a * besov_blocks(f, s, dy, partition)) ** 2 for a, f in zip(scales, fields))
    return np.sqrt(sq)


def pair_norm(fields: Sequence[SpectralField], s: float, dy: bool = False, scales=None) -> float:
    """B^s norm of a vector field, e.g. ``pair_norm([u, v], 0.5, scales=[1, eps])``."""
    if not -2.0 <= s <= 3.0:
        raise ValidationError(f"s = {s} outside supported range [-2, 3]")
    return float(pair_blocks(fields, s, dy, scales).sum())


def block_series(
    fields: Sequence[SpectralField], s: float, dy: bool = False, partition=None
) -> np.ndarray:
    """Stack of ``besov_blocks`` for each field; shape (nt, nq)."""
    return np.array([besov_blocks(f, s, dy, partition) for f in fields])


def _check_times(times, T):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1:
        raise ValidationError("need at least one time stamp")
    if np.any(np.diff(times) <= 0):
        raise ValidationError("time stamps must be strictly increasing")
    if T is None:
        T = times[-1]
    if T > times[-1] + 1e-12 * max(1.0, abs(times[-1])):
        raise ValueError(f"T = {T} beyond recorded horizon {times[-1]}")
    return times, T


def _truncate(times, values, T):
    """Restrict a piecewise-linear series to [times[0], T]."""
    n = np.searchsorted(times, T, side="right")
    t = times[:n]
    v = values[:n]
    if n < len(times) and T > t[-1]:
        a = (T - times[n - 1]) / (times[n] - times[n - 1])
        t = np.append(t, T)
        v = np.concatenate([v, (1 - a) * values[n - 1 : n] + a * values[n : n + 1]])
    return t, v


def cl_from_blocks(
    times, blocks: np.ndarray, p: float, T: float | None = None, weight=None
) -> float:
    """Chemin-Lerner aggregate from a (nt, nq) series of 2^{qs}-scaled block norms.

    ``weight`` (same length as ``times``) gives the time-weighted variant.
    """
    times, T = _check_times(times, T)
    blocks = np.asarray(blocks, dtype=float)
    if weight is not None:
        weight = np.asarray(weight, dtype=float)
        if np.any(weight < 0):
            raise ValidationError("weight must be nonnegative")
    if p == math.inf:
        t, b = _truncate(times, blocks, T)
        if weight is not None:
            raise ValidationError("p = inf does not take a time weight")
        return float(b.max(axis=0).sum())
    t, b = _truncate(times, blocks, T)
    if weight is not None:
        _, wt = _truncate(times, weight[:, None], T)
    else:
        wt = np.ones((len(t), 1))
    if len(t) == 1:
        return 0.0
    # piecewise-linear blocks and weight, 3-point Gauss-Legendre per interval
    nodes, gw = np.polynomial.legendre.leggauss(3)
    dt = np.diff(t)[:, None]
    integral = np.zeros(b.shape[1])
    for x, w in zip(0.5 * (nodes + 1), 0.5 * gw):
        bi = (1 - x) * b[:-1] + x * b[1:]
        wi = (1 - x) * wt[:-1] + x * wt[1:]
        integral += w * np.sum(dt * wi * np.abs(bi) ** p, axis=0)
    return float((np.maximum(integral, 0.0) ** (1.0 / p)).sum())


def chemin_lerner_norm(
    times, fields: Sequence[SpectralField], p: float, s: float, T: float | None = None,
    dy: bool = False,
) -> float:
    return cl_from_blocks(times, block_series(fields, s, dy), p, T)


def weighted_cl_norm(
    times, fields: Sequence[SpectralField], p: float, s: float, weight,
    T: float | None = None, dy: bool = False,
) -> float:
    weight = np.asarray(weight, dtype=float)
    if np.any(weight < 0):
        raise ValidationError("weight must be a nonnegative function")
    return cl_from_blocks(times, block_series(fields, s, dy), p, T, weight)


@dataclass
class NormSeries:
    """Time-stamped nonnegative diagnostics keyed by tag."""

    times: list[float] = field(default_factory=list)
    entries: list[dict[str, float]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, t: float, values: dict[str, float]):
        if self.times and t <= self.times[-1]:
            raise ValidationError(f"time {t} not after {self.times[-1]}")
        for k, v in values.items():
            if not v >= 0:
                raise ValidationError(f"entry {k} = {v} is negative or NaN")
        self.times.append(float(t))
        self.entries.append({k: float(v) for k, v in values.items()})

    def tags(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.update(dict.fromkeys(e))
        return list(seen)

    def column(self, tag: str) -> np.ndarray:
        return np.array([e.get(tag, np.nan) for e in self.entries])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "tag", "value"])
            for t, e in zip(self.times, self.entries):
                for k, v in e.items():
                    w.writerow([repr(t), k, repr(v)])

    @classmethod
    def from_csv(cls, path) -> "NormSeries":
        ns = cls()
        cur_t, cur = None, {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                t = float(row["time"])
                if cur_t is not None and t != cur_t:
                    ns.append(cur_t, cur)
                    cur = {}
                cur_t = t
                cur[row["tag"]] = float(row["value"])
        if cur_t is not None:
            ns.append(cur_t, cur)
        return ns


def iter_block_tags(prefix: str, qs: Iterable[int]):
    return [f"{prefix} q={int(q)}" for q in qs]
