import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_field
from mhdstrip.grid import ConfigError, GridSpec, SpectralField, l2_norm
from mhdstrip.lp import (
    BERNSTEIN_C,
    bernstein_check,
    bony_decompose,
    build_partition,
    dyadic_decompose,
    phi,
    product,
    psi,
)


def _mp_step(t):
    t = mpmath.mpf(t)
    f = lambda s: mpmath.e ** (-1 / s) if s > 0 else mpmath.mpf(0)
    return f(t) / (f(t) + f(1 - t))


def _mp_phi(z):
    lo, hi = mpmath.mpf(3) / 4, mpmath.mpf(4) / 3
    ps = lambda w: _mp_step((hi - abs(w)) / (hi - lo))
    return ps(mpmath.mpf(z) / 2) - ps(z)


def test_partition_of_unity_on_grid():
    g = GridSpec(2 * np.pi, 256, 64)
    part = build_partition(g)
    total = part.weights.sum(axis=0)
    nz = g.kabs > 0
    assert np.max(np.abs(total[nz] - 1)) <= 1e-12


def test_support_of_unit_wavenumber():
    g = GridSpec(2 * np.pi, 64, 8)
    part = build_partition(g)
    k1 = int(np.argmin(np.abs(g.k - 1)))
    live = [int(q) for q, w in zip(part.qs, part.weights[:, k1]) if w != 0]
    assert set(live) <= {-1, 0}


@pytest.mark.parametrize("q", [-1, 0, 1, 2])
def test_bump_matches_high_precision(q):
    got = float(phi(2.0 ** (-q) * 2))
    want = float(_mp_phi(mpmath.mpf(2) / mpmath.mpf(2) ** q))
    assert got == pytest.approx(want, abs=1e-14)


def test_bump_support_is_exact():
    z = np.linspace(0, 4, 4001)
    v = phi(z)
    assert np.all(v[z < 0.75] == 0)
    assert np.all(v[z > 8 / 3] == 0)
    assert np.all(v >= 0)


def test_short_q_range_names_missing_wavenumber():
    g = GridSpec(2 * np.pi, 64, 8)
    with pytest.raises(ConfigError, match=r"\|k\| = "):
        build_partition(g, (-2, 2))


def test_zero_field_decomposes_to_zero(small_grid):
    lad = dyadic_decompose(SpectralField.zeros(small_grid))
    assert all(b.max_abs() == 0 for b in lad.blocks.values())
    assert lad.low_part.max_abs() == 0


def test_single_mode_three_lives_in_two_blocks(small_grid):
    f = SpectralField.from_function(small_grid, lambda x, y: np.cos(3 * x) * np.sin(np.pi * y))
    lad = dyadic_decompose(f)
    live = {q for q, b in lad.blocks.items() if b.max_abs() > 1e-14}
    assert live and live <= {1, 2}
    k3 = 3
    w = sum(float(phi(2.0 ** (-q) * 3)) for q in range(-4, 8))
    amp = sum(b.coeffs[k3].real for b in lad.blocks.values())
    assert w == pytest.approx(1, abs=1e-14)
    assert amp == pytest.approx(f.coeffs[k3].real, rel=1e-13)


def test_reconstruction(small_grid, rng):
    f = random_field(small_grid, rng)
    back = dyadic_decompose(f).reconstruct().to_physical()
    assert np.max(np.abs(back - f.to_physical())) <= 1e-12 * np.max(np.abs(f.to_physical()))


def test_bony_zero(small_grid, rng):
    z = SpectralField.zeros(small_grid)
    parts = bony_decompose(z, random_field(small_grid, rng))
    assert all(p.max_abs() == 0 for p in parts)


def test_bony_single_mode_four():
    g = GridSpec(2 * np.pi, 32, 8)
    f = SpectralField.from_function(g, lambda x, y: np.cos(4 * x) + 0 * y)
    parts = bony_decompose(f, f)
    total = parts[0] + parts[1] + parts[2]
    # cos^2(4x) = 1/2 + cos(8x)/2 ; direct convolution of the two coefficient vectors
    c = f.coeffs[:, 0]
    conv = np.array([sum(c[m] * c[(n - m) % 32] for m in range(32)) for n in range(32)])
    assert total.coeffs[8, 0] == pytest.approx(conv[8], abs=1e-14)
    assert total.coeffs[0, 0] == pytest.approx(0.5, abs=1e-14)
    assert abs(total.coeffs[8, 0]) ** 2 == pytest.approx(1 / 16, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_bony_sum_is_product(seed):
    g = GridSpec(2 * np.pi, 32, 8)
    r = np.random.default_rng(seed)
    f, h = random_field(g, r), random_field(g, r)
    a, b, c = bony_decompose(f, h)
    fg = product(f, h)
    assert l2_norm(a + b + c - fg) <= 1e-12 * l2_norm(fg)


def test_bernstein_single_mode():
    g = GridSpec(2 * np.pi, 32, 8)
    f = SpectralField.from_function(g, lambda x, y: np.cos(4 * x) * np.sin(np.pi * y))
    rep = bernstein_check(dyadic_decompose(f).blocks[2], 2)
    assert rep.derivative_ratio == pytest.approx(1.0, rel=1e-12)
    assert 0.75 <= rep.derivative_ratio <= 8 / 3


def test_bernstein_vacuous(small_grid):
    rep = bernstein_check(SpectralField.zeros(small_grid), 1)
    assert rep.vacuous and rep.derivative_ratio is None


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_bernstein_random_blocks_within_constant(seed):
    g = GridSpec(2 * np.pi, 64, 8)
    f = random_field(g, np.random.default_rng(seed))
    for q, blk in dyadic_decompose(f).blocks.items():
        rep = bernstein_check(blk, q)
        if not rep.vacuous:
            assert 1 / BERNSTEIN_C <= rep.derivative_ratio <= BERNSTEIN_C
            assert rep.linf_ratio <= BERNSTEIN_C


@given(st.floats(0, 50, allow_nan=False))
def test_psi_phi_telescope(z):
    # sum_{q<=Q} phi(2^-q z) + psi(2^-q_min z) telescopes to psi(2^-Q z)
    tot = psi(4 * z) + sum(float(phi(2.0 ** (-q) * z)) for q in range(-2, 8))
    assert tot == pytest.approx(float(psi(2.0 ** (-7) * z)), abs=1e-12)
