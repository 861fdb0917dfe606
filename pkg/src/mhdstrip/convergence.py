"""Matched (scaled, limit) runs, Theta-weighted differences and the eps-rate fit."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .analyticity import AnalyticityState, advance_radius
from .besov import blocks_from_energy, cl_from_blocks
from .grid import SpectralField, ValidationError, mode_energy, mode_grad_energy
from .imex import TOL_DIV, divergence_residual
from .lp import build_partition
from .runner import RunConfig, Simulation
from .state import MhdState

TERM_LABELS = (
    "Linf~ B1/2 (Psi1, eps Psi2)",
    "Linf B1/2 (Phi1, eps Phi2)",
    "L2~ B1/2 dy(Psi1, eps Psi2)",
    "eps L2~ B3/2 (Psi1, eps Psi2)",
    "L2~ B1/2 dy(Phi1, eps Phi2)",
    "eps L2~ B3/2 (Phi1, eps Phi2)",
)
DIFF_NAMES = ("psi1", "psi2", "phi1", "phi2")
SOURCES = {"psi1": "u", "psi2": "v", "phi1": "b", "phi2": "c"}


@dataclass(frozen=True)
class SweepPlan:
    base: RunConfig
    epsilons: tuple
    mu: float | None = None  # None: max(lambda, M)
    terms: tuple = tuple(range(1, 7))

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if not eps:
            raise ValidationError("a sweep needs at least one epsilon")
        if any(not 0 < e <= 1 for e in eps):
            raise ValidationError("epsilons must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValidationError("epsilons must be strictly decreasing")
        if not set(self.terms) <= set(range(1, 7)):
            raise ValidationError("terms are numbered 1..6")

    @property
    def fittable(self) -> bool:
        return len(self.epsilons) >= 3


def unweight(state: MhdState, radius: float) -> MhdState:
    g = state.grid
    m = np.exp(-radius * g.kabs)[:, None]
    f = {k: SpectralField(g, v.coeffs * m) for k, v in state.fields().items()}
    return MhdState(state.time, flavor=state.flavor, **f)


def difference_fields(scaled: MhdState, limit: MhdState, tol: float = TOL_DIV) -> MhdState:
    """(Psi1, Psi2, Phi1, Phi2, q) = scaled - limit, both unweighted."""
    scaled.grid.check_same(limit.grid)
    if abs(scaled.time - limit.time) > 1e-12 * max(1.0, abs(scaled.time)):
        raise ValueError(f"time mismatch: {scaled.time} vs {limit.time}")
    f = {k: scaled.fields()[k] - limit.fields()[k] for k in ("u", "v", "b", "c", "p")}
    out = MhdState(scaled.time, flavor="difference", **f)
    scale = 1.0 + max(scaled.max_abs(), limit.max_abs())
    for a, b in (("u", "v"), ("b", "c")):
        r = divergence_residual(getattr(out, a), getattr(out, b))
        if r > 2 * tol * scale:
            raise ValidationError(f"difference field not divergence free: residual {r:.3e}")
    return out


@dataclass
class DiffSeries:
    """Per-mode energies of the unweighted differences at each recorded time."""

    eps: float
    times: list[float] = field(default_factory=list)
    energies: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def append(self, diff: MhdState):
        if self.times and diff.time <= self.times[-1]:
            raise ValidationError("difference times must increase")
        h = diff.grid.h
        self.times.append(diff.time)
        for name, src in SOURCES.items():
            c = getattr(diff, src).coeffs
            self.energies.setdefault(name, []).append(mode_energy(c, h))
            self.energies.setdefault("dy_" + name, []).append(mode_grad_energy(c, h))

    def energy(self, name) -> np.ndarray:
        return np.array(self.energies[name])

    def scaled(self, factor: float) -> "DiffSeries":
        return DiffSeries(self.eps, list(self.times),
                          {k: [factor**2 * e for e in v] for k, v in self.energies.items()})


def _b12(e, grid):
    return blocks_from_energy(e, 0.5, build_partition(grid))


def eta_rates(scaled_rec, limit_rec) -> np.ndarray:
    """eta' at every recorded time, from logged mode energies."""
    g = scaled_rec.grid
    eps = scaled_rec.eps
    e_s = scaled_rec.energy("dy_u") + eps**2 * g.kabs**2 * scaled_rec.energy("u")
    return _b12(e_s, g).sum(axis=1) + _b12(limit_rec.energy("dy_u"), g).sum(axis=1)


def theta_weight_series(scaled_rec, limit_rec, mu: float) -> AnalyticityState:
    """eta by explicit Euler and the Theta radius a - mu*eta; flags domination by both run radii."""
    if len(scaled_rec.times) != len(limit_rec.times) or not np.allclose(
        scaled_rec.times, limit_rec.times, rtol=0, atol=1e-12
    ):
        raise ValueError("scaled and limit records are not time-aligned")
    a = scaled_rec.config.a
    rates = eta_rates(scaled_rec, limit_rec)
    th = AnalyticityState(a, mu, label="eta")
    t = scaled_rec.times
    hs, hl = scaled_rec.analyticity.history, limit_rec.analyticity.history

    def dominated(i):
        lim = min(hs[i]["radius_remaining"], hl[i]["radius_remaining"])
        return th.radius <= lim + 1e-12 * a

    th.history[-1]["dominated"] = dominated(0)
    for i in range(len(t) - 1):
        advance_radius(th, float(rates[i]), t[i + 1] - t[i])
        th.history[-1]["dominated"] = dominated(i + 1)
    th.history[-1]["eta_rate"] = float(rates[-1])
    return th


def error_functional(diff: DiffSeries, theta, grid) -> dict:
    """Six Theta-weighted norm terms of the convergence estimate, their sum and the printed product form.

    ``theta`` is an AnalyticityState (eta series) or an array of Theta radii.
    """
    eps = diff.eps
    if isinstance(theta, AnalyticityState):
        radii = np.array([h["radius_remaining"] for h in theta.history])
    else:
        radii = np.asarray(theta, dtype=float)
    t = np.array(diff.times)
    if len(radii) != len(t):
        raise ValueError("Theta series and difference series have different lengths")
    w = np.exp(2 * np.maximum(radii, 0.0)[:, None] * grid.kabs[None, :])
    part = build_partition(grid)

    def pair(a, b, dy=False, s=0.5):
        pre = "dy_" if dy else ""
        e = w * (diff.energy(pre + a) + eps**2 * diff.energy(pre + b))
        return blocks_from_energy(e, s, part)

    if len(t) < 2:
        raise ValueError("difference series needs at least two times")
    T = [
        cl_from_blocks(t, pair("psi1", "psi2"), math.inf),
        float(pair("phi1", "phi2").sum(axis=1).max()),
        cl_from_blocks(t, pair("psi1", "psi2", dy=True), 2),
        eps * cl_from_blocks(t, pair("psi1", "psi2", s=1.5), 2),
        cl_from_blocks(t, pair("phi1", "phi2", dy=True), 2),
        eps * cl_from_blocks(t, pair("phi1", "phi2", s=1.5), 2),
    ]
    out = {f"E_term_{i + 1}": v for i, v in enumerate(T)}
    out["E_total"] = float(sum(T))
    out["E_product"] = float(T[0] + T[1] * T[2] + T[3] + T[4] + T[5])
    return out


def M_terms(scaled_rec, limit_rec) -> dict:
    """The five recorded norms bounding the solutions; M = max(1, their sum)."""
    g = limit_rec.grid
    part = build_partition(g)
    t_s, t_l = np.array(scaled_rec.times), np.array(limit_rec.times)

    def B(e, s):
        return blocks_from_energy(e, s, part)

    e_s = scaled_rec.energy("u") + scaled_rec.energy("b")
    e_l = limit_rec.energy("u") + limit_rec.energy("b")
    dy_l = limit_rec.energy("dy_u") + limit_rec.energy("dy_b")
    terms = {
        "Linf~ B1/2 (u^eps, b^eps)": cl_from_blocks(t_s, B(e_s, 0.5), math.inf),
        "Linf~ B1/2 cap B5/2 (u, b)": cl_from_blocks(t_l, B(e_l, 0.5), math.inf)
        + cl_from_blocks(t_l, B(e_l, 2.5), math.inf),
        "L2~ B1/2 cap B5/2 dy(u, b)": cl_from_blocks(t_l, B(dy_l, 0.5), 2)
        + cl_from_blocks(t_l, B(dy_l, 2.5), 2),
    }
    if len(limit_rec.dt_times) >= 2:
        e_t = np.array(limit_rec.dt_energies["u"]) + np.array(limit_rec.dt_energies["b"])
        terms["L2~ B3/2 (d_t(u, b))_phi"] = cl_from_blocks(np.array(limit_rec.dt_times), B(e_t, 1.5), 2)
    else:
        terms["L2~ B3/2 (d_t(u, b))_phi"] = 0.0
    return {"terms": terms, "M": max(1.0, float(sum(terms.values())))}


@dataclass
class PairResult:
    eps: float
    terms: dict
    healthy: bool
    M: float
    mu: float
    theta_positive: bool
    dominated: bool
    notes: list = field(default_factory=list)

    @property
    def E_total(self) -> float:
        return self.terms["E_total"]

    def row(self) -> dict:
        r = {"epsilon": self.eps, "E_total": self.E_total}
        r.update({f"E_term_{i}": self.terms[f"E_term_{i}"] for i in range(1, 7)})
        r["E_product"] = self.terms["E_product"]
        r["healthy"] = self.healthy
        return r


def _diff_at(ss: Simulation, ls: Simulation) -> MhdState:
    return difference_fields(unweight(ss.state, ss.an.radius), unweight(ls.state, ls.an.radius))


def run_pair(base: RunConfig, eps: float, mu: float | None = None, return_records: bool = False):
    """Step the limit and the eps-scaled run in lockstep from identical (u_0, b_0)."""
    lcfg = base.with_(epsilon=None, epsilons=())
    scfg = base.with_(epsilon=float(eps), epsilons=())
    ls = Simulation(lcfg, "limit", keep_every=0, series=False)
    ss = Simulation(scfg, f"eps={eps:g}", keep_every=0, series=False)
    diff = DiffSeries(float(eps))
    d0 = _diff_at(ss, ls)
    if d0.max_abs() != 0.0:
        raise AssertionError("initial differences must vanish for identical data")
    diff.append(d0)
    while not (ls.done or ss.done):
        ok_l, ok_s = ls.step(), ss.step()
        if not (ok_l and ok_s):
            break
        diff.append(_diff_at(ss, ls))
    lrec, srec = ls.finish(), ss.finish()
    healthy = bool(lrec.health["healthy"] and srec.health["healthy"])
    n = min(len(lrec.times), len(srec.times), len(diff.times))
    notes = []
    if not healthy:
        notes.append("run stopped early")
        for rec in (lrec, srec):
            for k in rec.energies:
                rec.energies[k] = rec.energies[k][:n]
            del rec.analyticity.history[n:]
            del rec.times[n:]
    Md = M_terms(srec, lrec)
    mu_eff = mu if mu is not None else max(base.lam, Md["M"])
    th = theta_weight_series(srec, lrec, mu_eff)
    theta_positive = th.healthy
    dominated = all(h.get("dominated", True) for h in th.history)
    if not theta_positive:
        notes.append("Theta radius exhausted")
        healthy = False
    terms = error_functional(diff, th, base.grid)
    res = PairResult(float(eps), terms, healthy, Md["M"], mu_eff, theta_positive, dominated, notes)
    if return_records:
        return res, srec, lrec, diff, th
    return res


def fit_rate(entries) -> dict:
    """Least squares on (log eps, log E) with a 95% confidence half-width on the slope."""
    used, excluded = [], []
    for e, E in entries:
        if E > 0 and e > 0 and math.isfinite(E):
            used.append((float(e), float(E)))
        else:
            excluded.append({"epsilon": e, "reason": "E = 0 or non-finite"})
    if len(used) < 3:
        raise ValueError(f"rate fit needs at least 3 usable entries, got {len(used)}")
    x = np.log([u[0] for u in used])
    y = np.log([u[1] for u in used])
    res = stats.linregress(x, y)
    n = len(used)
    ci = float(stats.t.ppf(0.975, n - 2) * res.stderr) if n > 2 else math.inf
    return {
        "slope": float(res.slope), "intercept": float(res.intercept), "r2": float(res.rvalue**2),
        "ci": ci, "entries_used": [u[0] for u in used], "excluded": excluded,
    }


def _pair_worker(args):
    base, eps, mu = args
    return run_pair(base, eps, mu)


def write_sweep_csv(path, results):
    cols = ["epsilon", "E_total"] + [f"E_term_{i}" for i in range(1, 7)] + ["E_product", "healthy"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in results:
            row = r.row() if isinstance(r, PairResult) else r
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def run_sweep(plan: SweepPlan, out_dir=None, workers: int = 1, results=None) -> dict:
    """Run (or accept injected ``results``) for every eps, write CSV and fit JSON."""
    if results is None:
        jobs = [(plan.base, e, plan.mu) for e in plan.epsilons]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_pair_worker, jobs))
        else:
            results = [_pair_worker(j) for j in jobs]
    rows = [r.row() if isinstance(r, PairResult) else dict(r) for r in results]
    healthy = [(r["epsilon"], r["E_total"]) for r in rows if r.get("healthy", True)]
    summary: dict
    try:
        summary = fit_rate(healthy)
    except ValueError as exc:
        summary = {"slope": None, "ci": None, "entries_used": [], "error": str(exc)}
    Es = [r["E_total"] for r in rows]
    summary["monotone"] = bool(all(b <= a for a, b in zip(Es, Es[1:])))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_sweep_csv(os.path.join(out_dir, "sweep.csv"), rows)
        with open(os.path.join(out_dir, "fit.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
    summary["rows"] = rows
    return summary


def theorem3_from_records(scaled_rec, limit_rec, C=None, mu=None) -> dict:
    """Convergence bound from two recorded runs (differences taken at commonly kept steps)."""
    from .energy import initial_pair_norm

    if scaled_rec.eps is None or limit_rec.eps is not None:
        raise ValueError("theorem 3 needs (scaled, limit) records")
    common = sorted(set(scaled_rec.state_steps) & set(limit_rec.state_steps))
    if len(common) < 2:
        raise ValueError("records share fewer than two kept steps")
    s_map = dict(zip(scaled_rec.state_steps, scaled_rec.states))
    l_map = dict(zip(limit_rec.state_steps, limit_rec.states))
    hs, hl = scaled_rec.analyticity.history, limit_rec.analyticity.history
    diff = DiffSeries(scaled_rec.eps)
    for n in common:
        diff.append(difference_fields(unweight(s_map[n], hs[n]["radius_remaining"]),
                                      unweight(l_map[n], hl[n]["radius_remaining"])))
    Md = M_terms(scaled_rec, limit_rec)
    mu_eff = mu if mu is not None else max(limit_rec.config.lam, Md["M"])
    th = theta_weight_series(scaled_rec, limit_rec, mu_eff)
    radii = np.array([th.history[n]["radius_remaining"] for n in common])
    terms = error_functional(diff, radii, scaled_rec.grid)
    d0 = difference_fields(unweight(s_map[0], hs[0]["radius_remaining"]),
                           unweight(l_map[0], hl[0]["radius_remaining"]))
    a = scaled_rec.config.a
    d0w = MhdState(0.0, flavor="difference", **{
        k: SpectralField(d0.grid, f.coeffs * np.exp(a * d0.grid.kabs)[:, None])
        for k, f in d0.fields().items()})
    init = initial_pair_norm(d0w, scaled_rec.eps)
    rhs = init + Md["M"] * scaled_rec.eps
    lhs = terms["E_total"]
    ratio = lhs / rhs if rhs > 0 else 0.0
    return {"run_id": scaled_rec.run_id, "check": "theorem 3",
            "params": {"epsilon": scaled_rec.eps, "mu": mu_eff}, "lhs": lhs, "rhs": rhs,
            "ratio": ratio, "pass": None if C is None else bool(ratio <= C),
            "terms": terms, "M": Md, "initial_difference": init}
