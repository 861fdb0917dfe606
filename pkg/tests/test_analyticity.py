import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_field
from mhdstrip.analyticity import (
    AnalyticityState,
    advance_radius,
    apply_weight,
    eta_rate,
    tau_rate,
    theta_rate,
)
from mhdstrip.besov import besov_norm, pair_norm
from mhdstrip.grid import GridSpec, SpectralField, ValidationError
from mhdstrip.lp import phi


def test_weight_identity_and_mode(small_grid, rng):
    f = random_field(small_grid, rng)
    assert np.array_equal(apply_weight(f, 0.0).coeffs, f.coeffs)
    one = SpectralField.from_function(small_grid, lambda x, y: np.cos(x) * np.sin(np.pi * y))
    w = apply_weight(one, 0.5)
    assert w.coeffs[1, 3] == pytest.approx(one.coeffs[1, 3] * math.exp(0.5), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 2))
def test_weight_round_trip(seed, r):
    g = GridSpec(2 * np.pi, 32, 8)
    f = random_field(g, np.random.default_rng(seed))
    back = apply_weight(apply_weight(f, r), r, -1)
    assert np.max(np.abs(back.to_physical() - f.to_physical())) <= 1e-12 * np.max(np.abs(f.to_physical()))


def test_weight_overflow_guard(small_grid):
    with pytest.raises(ValidationError, match="radius too large"):
        apply_weight(SpectralField.zeros(small_grid), 100.0)


def test_theta_rate_zero(small_grid):
    z = SpectralField.zeros(small_grid)
    assert theta_rate(z, z) == 0.0


def test_theta_rate_scalar_oracle():
    g = GridSpec(2 * np.pi, 32, 200)
    d = 1e-3
    u = SpectralField.from_function(g, lambda x, y: d * np.cos(2 * x) * np.sin(np.pi * y))
    bump = sum(2 ** (q / 2) * float(phi(2.0 ** (-q) * 2)) for q in range(-2, 10))
    # ||pi cos(pi y) cos 2x|| = pi * sqrt(1/2) * sqrt(pi)
    want = d * bump * math.pi * math.sqrt(0.5) * math.sqrt(math.pi)
    assert theta_rate(u, SpectralField.zeros(g)) == pytest.approx(want, rel=1e-4)


def test_tau_rate(small_grid, rng):
    u, v = random_field(small_grid, rng), random_field(small_grid, rng)
    z = SpectralField.zeros(small_grid)
    assert tau_rate(u, z, 0.1) == pytest.approx(besov_norm(u, 0.5, dy=True), rel=1e-14)
    want = besov_norm(u, 0.5, dy=True) + 0.1 * besov_norm(v, 0.5, dy=True)
    assert tau_rate(u, v, 0.1) == pytest.approx(want, rel=1e-13)


def test_eta_rate(small_grid, rng):
    z = SpectralField.zeros(small_grid)
    assert eta_rate(z, z, 0.1) == 0.0
    us, ul = random_field(small_grid, rng), random_field(small_grid, rng)
    assert eta_rate(us, ul, 0.0) == pytest.approx(
        besov_norm(us, 0.5, dy=True) + besov_norm(ul, 0.5, dy=True), rel=1e-13)
    dxu = SpectralField(small_grid, 1j * small_grid.k[:, None] * us.coeffs)
    # pair of (dy u, eps dx u): dy is staggered, so compare blockwise through energies
    from mhdstrip.besov import besov_blocks
    pair = np.sqrt(besov_blocks(us, 0.5, dy=True) ** 2 + (0.1 * besov_blocks(dxu, 0.5)) ** 2).sum()
    assert eta_rate(us, ul, 0.1) == pytest.approx(pair + besov_norm(ul, 0.5, dy=True), rel=1e-12)
    with pytest.raises(ValueError, match="misalignment"):
        eta_rate(us, ul, 0.1, t_scaled=1.0, t_limit=1.5, dt=0.1)


def test_advance_radius_examples():
    an = AnalyticityState(0.5, 4.0)
    advance_radius(an, 0.0, 0.1)
    assert an.theta == 0.0
    an = AnalyticityState(0.5, 4.0)
    advance_radius(an, 0.3, 0.01)
    assert an.theta == pytest.approx(0.003)
    with pytest.raises(ValidationError):
        advance_radius(an, -1.0, 0.01)


def test_euler_sum_against_refined_step():
    rate = lambda t: 1 + t + 0.5 * math.sin(3 * t)

    def run(dt, n):
        an = AnalyticityState(10.0, 1.0)
        for i in range(n):
            advance_radius(an, rate(i * dt), dt)
        return an.theta

    coarse = run(1e-3, 1000)
    fine = run(1e-4, 10000)
    assert coarse == pytest.approx(sum(rate(i * 1e-3) * 1e-3 for i in range(1000)), rel=1e-13)
    assert coarse == pytest.approx(fine, rel=1e-3)


def test_exhaustion_marks_unhealthy():
    an = AnalyticityState(0.1, 1.0)
    advance_radius(an, 1.0, 0.2)
    assert not an.healthy and an.radius < 0


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30))
def test_theta_monotone(rates):
    an = AnalyticityState(1.0, 1.0)
    prev = 0.0
    for r in rates:
        advance_radius(an, r, 0.01)
        assert an.theta >= prev
        prev = an.theta
