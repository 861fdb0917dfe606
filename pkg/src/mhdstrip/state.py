"""MhdState container and the binary snapshot format."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .grid import GridSpec, SpectralField

FLAVORS = ("limit", "scaled", "difference")
MAGIC = b"MHDSNAP1"
# magic, flavor (16 bytes ascii, NUL padded), nx, ny, L, time, a, lambda, theta
HEADER = struct.Struct("<8s16sqqddddd")
FIELD_ORDER = ("u", "v", "b", "c", "p")


@dataclass
class MhdState:
    time: float
    u: SpectralField
    v: SpectralField
    b: SpectralField
    c: SpectralField
    p: SpectralField
    flavor: str = "limit"

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: GridSpec, flavor: str = "limit", time: float = 0.0) -> "MhdState":
        z = SpectralField.zeros
        return cls(time, z(grid), z(grid), z(grid), z(grid), z(grid), flavor)

    def fields(self) -> dict[str, SpectralField]:
        return {name: getattr(self, name) for name in FIELD_ORDER}

    def copy(self) -> "MhdState":
        return replace(self, **{k: f.copy() for k, f in self.fields().items()})

    def max_abs(self) -> float:
        return max(f.max_abs() for f in self.fields().values())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(f.coeffs)) for f in self.fields().values())


def write_snapshot(path, state: MhdState, a: float, lam: float, theta: float):
    g = state.grid
    head = HEADER.pack(
        MAGIC, state.flavor.encode("ascii"), g.nx, g.ny, g.period_L,
        state.time, a, lam, theta,
    )
    data = np.stack([state.fields()[k].coeffs for k in FIELD_ORDER])
    buf = np.empty(data.shape + (2,), dtype="<f8")
    buf[..., 0] = data.real
    buf[..., 1] = data.imag
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(buf.tobytes())
    tmp.replace(path)


def read_snapshot(path) -> tuple[MhdState, dict]:
    raw = Path(path).read_bytes()
    magic, flavor, nx, ny, L, t, a, lam, theta = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    grid = GridSpec(L, nx, ny)
    n = len(FIELD_ORDER) * nx * ny * 2
    arr = np.frombuffer(raw, dtype="<f8", count=n, offset=HEADER.size)
    arr = arr.reshape(len(FIELD_ORDER), nx, ny, 2)
    coeffs = arr[..., 0] + 1j * arr[..., 1]
    fields = {k: SpectralField(grid, coeffs[i]) for i, k in enumerate(FIELD_ORDER)}
    state = MhdState(t, flavor=flavor.rstrip(b"\0").decode("ascii"), **fields)
    return state, {"a": a, "lambda": lam, "theta": theta}
