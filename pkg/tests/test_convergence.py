import csv
import json
import math

import numpy as np
import pytest

from conftest import random_field
from mhdstrip.analyticity import apply_weight
from mhdstrip.besov import pair_norm
from mhdstrip.convergence import (
    DiffSeries,
    SweepPlan,
    difference_fields,
    error_functional,
    eta_rates,
    fit_rate,
    run_pair,
    run_sweep,
    theta_weight_series,
)
from mhdstrip.grid import GridSpec, SpectralField, ValidationError
from mhdstrip.imex import project_zero_mean, recover_v
from mhdstrip.runner import parse_config, simulate
from mhdstrip.state import MhdState


def base(profile="mode1", t_end=0.02, delta=1e-2):
    return parse_config({"grid": {"nx": 32, "ny": 16},
                         "run": {"dt": 1e-3, "t_end": t_end, "snapshot_every": 1},
                         "data": {"delta": delta, "profile": profile}})


def admissible_state(grid, rng, flavor):
    fs = []
    for _ in range(2):
        f = random_field(grid, rng, zero_mean=True)
        fs.append(SpectralField(grid, project_zero_mean(f.coeffs, grid)))
    u, b = fs
    return MhdState(0.5, u, recover_v(u), b, recover_v(b), SpectralField.zeros(grid), flavor)


def test_difference_examples(small_grid, rng):
    s = admissible_state(small_grid, rng, "scaled")
    l = admissible_state(small_grid, rng, "limit")
    assert difference_fields(s, s).max_abs() == 0
    z = MhdState.zeros(small_grid, "limit", time=0.5)
    d = difference_fields(s, z)
    assert all(np.array_equal(d.fields()[k].coeffs, s.fields()[k].coeffs) for k in "uvbc")
    d = difference_fields(s, l)
    assert np.array_equal(d.u.coeffs, s.u.coeffs - l.u.coeffs)
    assert d.flavor == "difference"
    with pytest.raises(ValueError, match="time"):
        difference_fields(s, MhdState.zeros(small_grid, time=0.7))
    with pytest.raises(ValueError, match="grid"):
        difference_fields(s, MhdState.zeros(GridSpec(2 * np.pi, 16, 16), time=0.5))


def test_eta_zero_runs():
    cfgz = base("zero")
    ls, ss = simulate(cfgz), simulate(cfgz.with_(epsilon=0.1))
    th = theta_weight_series(ss, ls, 5.0)
    assert th.theta == 0 and all(h["radius_remaining"] == cfgz.a for h in th.history)


def test_mu_zero_keeps_radius():
    c = base()
    ls, ss = simulate(c), simulate(c.with_(epsilon=0.1))
    th = theta_weight_series(ss, ls, 0.0)
    assert th.theta > 0 and all(h["radius_remaining"] == c.a for h in th.history)


def test_eta_refined_step_oracle():
    # eta is an explicit Euler sum; dt is kept small against the 4 pi^2 decay of its integrand
    c = base(t_end=0.005).with_(dt=2e-5)
    ls, ss = simulate(c), simulate(c.with_(epsilon=0.1))
    th = theta_weight_series(ss, ls, 4.0)
    r = eta_rates(ss, ls)
    t = np.array(ls.times)
    tf = np.linspace(t[0], t[-1], 10 * (len(t) - 1) + 1)
    rf = np.interp(tf, t, r)
    fine = np.sum(rf[:-1] * np.diff(tf))
    assert th.theta == pytest.approx(fine, rel=1e-3)


def test_error_functional_zero_and_homogeneous():
    c = base()
    res, ss, ls, diff, th = run_pair(c, 0.2, return_records=True)
    zero = diff.scaled(0.0)
    assert all(v == 0 for v in error_functional(zero, th, c.grid).values())
    E1 = error_functional(diff, th, c.grid)
    E2 = error_functional(diff.scaled(2.0), th, c.grid)
    for k in ("E_term_1", "E_term_3", "E_term_4", "E_total"):
        assert E2[k] == pytest.approx(2 * E1[k], rel=1e-12)
    assert E1["E_total"] == pytest.approx(res.E_total, rel=1e-14)


def test_first_term_direct_one_step():
    c = base(t_end=1e-3)
    eps = 0.2
    res, ss, ls, diff, th = run_pair(c, eps, return_records=True)
    # direct: Theta-weighted pair norm of the final difference (the initial one is zero)
    r_s, r_l = ss.analyticity.radius, ls.analyticity.radius
    un = lambda f, r: apply_weight(f, r, -1)
    psi1 = un(ss.final_state.u, r_s) - un(ls.final_state.u, r_l)
    psi2 = un(ss.final_state.v, r_s) - un(ls.final_state.v, r_l)
    rad = th.history[-1]["radius_remaining"]
    want = pair_norm([apply_weight(psi1, rad), apply_weight(psi2, rad)], 0.5, scales=[1, eps])
    assert res.terms["E_term_1"] == pytest.approx(want, rel=1e-10)
    assert res.terms["E_term_1"] > 0


def test_fit_rate_synthetic():
    eps = [0.2, 0.1, 0.05, 0.025]
    f = fit_rate([(e, 2 * e) for e in eps])
    assert abs(f["slope"] - 1) <= 1e-10 and f["r2"] == pytest.approx(1.0)
    f = fit_rate([(e, 3 * e**2) for e in eps])
    assert f["slope"] == pytest.approx(2.0, abs=1e-10)
    f = fit_rate([(e, 2 * e) for e in eps] + [(0.01, 0.0)])
    assert f["excluded"] and f["excluded"][0]["epsilon"] == 0.01
    with pytest.raises(ValueError, match="at least 3"):
        fit_rate([(0.2, 1.0), (0.1, 0.5)])


def test_sweep_plan_validation():
    with pytest.raises(ValidationError, match="decreasing"):
        SweepPlan(base(), (0.1, 0.2))
    with pytest.raises(ValidationError):
        SweepPlan(base(), (1.5, 0.1))


def test_sweep_injected_and_refusal(tmp_path):
    plan = SweepPlan(base(), (0.4, 0.2, 0.1))
    rows = [{"epsilon": e, "E_total": 5 * e, "healthy": True} for e in plan.epsilons]
    rows = [dict(r, **{f"E_term_{i}": 0.0 for i in range(1, 7)}, E_product=0.0) for r in rows]
    out = run_sweep(plan, tmp_path / "a", results=rows)
    assert out["slope"] == pytest.approx(1.0, abs=1e-12)
    assert json.loads((tmp_path / "a" / "fit.json").read_text())["slope"] == pytest.approx(1.0)
    single = SweepPlan(base(t_end=0.005), (0.2,))
    out = run_sweep(single, tmp_path / "b")
    assert out["slope"] is None and "at least 3" in out["error"]
    with open(tmp_path / "b" / "sweep.csv") as fh:
        got = list(csv.DictReader(fh))
    assert len(got) == 1 and float(got[0]["epsilon"]) == 0.2


def test_small_sweep_is_monotone(tmp_path):
    out = run_sweep(SweepPlan(base(t_end=0.01), (0.4, 0.2, 0.1)), tmp_path)
    assert out["monotone"] and math.isfinite(out["slope"])
