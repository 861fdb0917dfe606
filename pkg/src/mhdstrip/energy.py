"""Per-block energy budgets, a priori bound monitors, calibration and trilinear checks.

Flux entries are signed contributions to the right-hand side of the block
energy balance, so that

    residual = ddt_energy + damping + dissipation + pressure - sum(fluxes).
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .besov import besov_blocks, blocks_from_energy, cl_from_blocks
from .grid import ValidationError, mode_energy, mode_grad_energy
from .imex import nonlinear_terms
from .lp import build_partition

BUDGET_TOL = 1e-6

LIMIT_FLUXES = {
    "u": {"I1": [(-1, "u*dx_u")], "I2": [(-1, "v*dy_u")],
          "I3": [(1, "b*dx_b")], "I4": [(1, "c*dy_b")]},
    "b": {"D1": [(-1, "u*dx_b")], "D2": [(-1, "v*dy_b")],
          "D3": [(1, "b*dx_u")], "D4": [(1, "c*dy_u")]},
}
# scaled: (sign, product, paired component); vertical pairings carry eps^2
SCALED_FLUXES = {
    "u": {"F1": [(-1, "u*dx_u", "u"), (-1, "u*dx_v", "v")],
          "F2": [(-1, "v*dy_u", "u"), (-1, "v*dy_v", "v")],
          "F3": [(1, "b*dx_b", "u"), (1, "b*dx_c", "v")],
          "F4": [(1, "c*dy_b", "u"), (1, "c*dy_c", "v")]},
    "b": {"F5": [(-1, "u*dx_b", "b"), (-1, "v*dy_b", "b"), (-1, "u*dx_c", "c"), (-1, "v*dy_c", "c")],
          "F6": [(1, "b*dx_u", "b"), (1, "c*dy_u", "b"), (1, "b*dx_v", "c"), (1, "c*dy_v", "c")]},
}
PARTNER = {"u": "v", "b": "c"}


@dataclass
class EnergyBudget:
    q: int
    window: tuple[int, int]
    equation: str
    terms: dict[str, float] = field(default_factory=dict)
    residual: float = 0.0

    @property
    def scale(self) -> float:
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def ok(self, tol: float = BUDGET_TOL) -> bool:
        return abs(self.residual) <= tol * self.scale

    @property
    def fluxes(self) -> dict[str, float]:
        return {k: v for k, v in self.terms.items() if k[0] in "IDF" and k[1:].isdigit()}


def _ip(x: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    """Per-mode Re <x, y> in L2(0, 1)."""
    return h * np.real(np.sum(x * np.conj(y), axis=-1))


def _need_every_step(record, n0: int, n1: int):
    steps = record.state_steps
    have = set(steps)
    need = range(max(n0 - 1, 0), n1 + 1)
    missing = [n for n in need if n not in have]
    if missing:
        raise ValueError(
            f"snapshot cadence too coarse for budget window [{n0}, {n1}): "
            f"requires snapshot_every = 1 (missing step {missing[0]})"
        )


def mode_budget_terms(record) -> dict[str, dict[str, np.ndarray]]:
    """Per-step, per-mode time-integrated budget terms for both equations (cached)."""
    cache = getattr(record, "_budget_cache", None)
    if cache is not None:
        return cache
    cfg = record.config
    g = record.grid
    h, dt, eps = g.h, cfg.dt, cfg.epsilon
    n_steps = len(record.times) - 1
    _need_every_step(record, 0, n_steps)
    states = dict(zip(record.state_steps, record.states))
    hist = record.analyticity.history
    rate_key = f"{record.analyticity.label}_rate"
    scaled = eps is not None
    e2 = (eps or 0.0) ** 2
    kabs = g.kabs
    out = {eq: {} for eq in ("u", "b")}

    def acc(eq, name, arr):
        out[eq].setdefault(name, []).append(arr)

    prev = None
    for n in range(n_steps):
        s0, s1 = states[n], states[n + 1]
        radius = hist[n]["radius_remaining"]
        rate = hist[n][rate_key]
        if cfg.nonlinear:
            parts = nonlinear_terms(s0.u.coeffs, s0.b.coeffs, radius, g,
                                    with_vertical=scaled, magnetic=cfg.magnetic, parts=True)
        else:
            parts = {}
        ext = parts if prev is None else {k: 1.5 * parts[k] - 0.5 * prev[k] for k in parts}
        prev = parts
        bar = {c: 0.5 * (getattr(s0, c).coeffs + getattr(s1, c).coeffs) for c in ("u", "v", "b", "c")}
        for eq in ("u", "b"):
            c0, c1 = getattr(s0, eq).coeffs, getattr(s1, eq).coeffs
            m = bar[eq]
            ddt = 0.5 * (mode_energy(c1, h) - mode_energy(c0, h))
            en = mode_energy(m, h)
            diss = mode_grad_energy(m, h)
            if scaled:
                pv = PARTNER[eq]
                p0, p1 = getattr(s0, pv).coeffs, getattr(s1, pv).coeffs
                ddt = ddt + 0.5 * e2 * (mode_energy(p1, h) - mode_energy(p0, h))
                en = en + e2 * mode_energy(bar[pv], h)
                diss = diss + e2 * mode_grad_energy(bar[pv], h) + e2 * kabs**2 * en
            acc(eq, "ddt_energy", ddt)
            acc(eq, "damping", dt * cfg.lam * rate * kabs * en)
            acc(eq, "dissipation", dt * diss)
            if eq == "u" and not scaled:
                dpx = 1j * g.k[:, None] * s1.p.coeffs
                acc(eq, "pressure", dt * _ip(dpx, m, h))
            else:
                acc(eq, "pressure", np.zeros(g.nx))
            table = SCALED_FLUXES[eq] if scaled else LIMIT_FLUXES[eq]
            for fname, items in table.items():
                tot = np.zeros(g.nx)
                for item in items:
                    sign, prod = item[0], item[1]
                    comp = item[2] if scaled else eq
                    w = e2 if comp in ("v", "c") else 1.0
                    if prod in ext:
                        tot = tot + sign * w * _ip(ext[prod], bar[comp], h)
                acc(eq, fname, dt * tot)
    out = {eq: {k: np.array(v) for k, v in d.items()} for eq, d in out.items()}
    record._budget_cache = out
    return out


def block_budget(record, q: int, window: tuple[int, int] | None = None,
                 equation: str = "total") -> EnergyBudget:
    """Budget of block q accumulated over steps [n0, n1) for 'u', 'b' or 'total'."""
    n_steps = len(record.times) - 1
    n0, n1 = window if window is not None else (0, n_steps)
    if not 0 <= n0 < n1 <= n_steps:
        raise ValueError(f"window {(n0, n1)} outside recorded steps [0, {n_steps}]")
    _need_every_step(record, n0, n1)
    part = build_partition(record.grid)
    if not part.q_min <= q <= part.q_max:
        raise ValueError(f"q = {q} outside [{part.q_min}, {part.q_max}]")
    wq = part.grid.period_L * part.block_weight(q) ** 2
    terms_all = mode_budget_terms(record)
    eqs = ("u", "b") if equation == "total" else (equation,)
    terms: dict[str, float] = {}
    for eq in eqs:
        for name, arr in terms_all[eq].items():
            val = float(arr[n0:n1].sum(axis=0) @ wq)
            terms[name] = terms.get(name, 0.0) + val
    flux = sum(v for k, v in terms.items() if k[0] in "IDF" and k[1:].isdigit())
    resid = terms["ddt_energy"] + terms["damping"] + terms["dissipation"] + terms["pressure"] - flux
    return EnergyBudget(q, (n0, n1), equation, terms, resid)


def all_budgets(record, width: int = 10, equation: str = "total") -> list[EnergyBudget]:
    n_steps = len(record.times) - 1
    part = build_partition(record.grid)
    out = []
    for n0 in range(0, n_steps - width + 1, width):
        for q in part.qs:
            out.append(block_budget(record, int(q), (n0, n0 + width), equation))
    return out


# ------------------------------------------------------------- bound monitors


def _blocks(e, s, grid, dx=0):
    return blocks_from_energy(e, s, build_partition(grid), dx)


def _pair(record, names, s, dx=0, scales=None, dy=False):
    scales = scales or [1.0] * len(names)
    pre = "dy_" if dy else ""
    e = sum(a**2 * record.energy(pre + n) for a, n in zip(scales, names))
    return _blocks(e, s, record.grid, dx)


def _report(record, check, params, lhs, rhs, C, extra=None):
    if rhs == 0:
        if lhs > 1e-300:
            ratio, ok = math.inf, False
        else:
            ratio, ok = 0.0, True
    else:
        ratio = lhs / rhs
        ok = None if C is None else bool(ratio <= C)
    out = {"run_id": getattr(record, "run_id", "?"), "check": check, "params": params,
           "lhs": lhs, "rhs": rhs, "ratio": ratio, "pass": ok}
    if extra:
        out.update(extra)
    return out


def initial_pair_norm(state, eps: float | None) -> float:
    """||e^{a|D|}(u_0, eps v_0)||_{B^1/2} + ||e^{a|D|}(b_0, eps c_0)||_{B^1/2} (eps None: pair (u_0, b_0))."""
    g = state.grid
    h = g.h
    if eps is None:
        e = mode_energy(state.u.coeffs, h) + mode_energy(state.b.coeffs, h)
        return float(_blocks(e, 0.5, g).sum())
    tot = 0.0
    for a, b in (("u", "v"), ("b", "c")):
        e = mode_energy(getattr(state, a).coeffs, h) + eps**2 * mode_energy(getattr(state, b).coeffs, h)
        tot += float(_blocks(e, 0.5, g).sum())
    return tot


def theorem1_terms(record) -> dict[str, float]:
    t = np.array(record.times)
    grow = np.exp(record.config.R * t)[:, None]
    return {
        "Linf_B1/2": cl_from_blocks(t, grow * _pair(record, ["u", "b"], 0.5), math.inf),
        "L2_dy_B1/2": cl_from_blocks(t, grow * _pair(record, ["u", "b"], 0.5, dy=True), 2),
    }


def theorem2_terms(record) -> dict[str, float]:
    eps = record.eps
    t = np.array(record.times)
    grow = np.exp(record.config.R * t)[:, None]
    out = {}
    for a, b in (("u", "v"), ("b", "c")):
        sc = [1.0, eps]
        out[f"Linf ({a},eps {b})"] = cl_from_blocks(t, grow * _pair(record, [a, b], 0.5, scales=sc), math.inf)
        out[f"L2 dy({a},eps {b})"] = cl_from_blocks(t, grow * _pair(record, [a, b], 0.5, scales=sc, dy=True), 2)
        out[f"eps L2 dx({a},eps {b})"] = eps * cl_from_blocks(
            t, grow * _pair(record, [a, b], 0.5, dx=1, scales=sc), 2)
    return out


def theorem_bound_check(record, theorem: int, C: float | None = None, limit_record=None,
                        mu: float | None = None) -> dict:
    """lhs / rhs of the a priori bound of the given theorem (1: limit, 2: scaled, 3: convergence)."""
    if not record.times or not record.states:
        raise ValueError("incomplete record: no recorded states")
    if theorem == 1:
        if record.eps is not None:
            raise ValueError("theorem 1 applies to limit runs")
        terms = theorem1_terms(record)
        rhs = initial_pair_norm(record.initial, None)
    elif theorem == 2:
        if record.eps is None:
            raise ValueError("theorem 2 applies to scaled runs")
        terms = theorem2_terms(record)
        rhs = initial_pair_norm(record.initial, record.eps)
    elif theorem == 3:
        from .convergence import theorem3_from_records

        if limit_record is None:
            raise ValueError("theorem 3 needs the matched limit record")
        return theorem3_from_records(record, limit_record, C=C, mu=mu)
    else:
        raise ValueError(f"unknown theorem {theorem}; available: 1, 2, 3")
    lhs = float(sum(terms.values()))
    return _report(record, f"theorem {theorem}", {"R": record.config.R}, lhs, rhs, C,
                   {"terms": terms})


def smallness_trace(record) -> np.ndarray:
    """||(u_phi, b_phi)(t)||_{B^1/2} (pair) at every recorded time."""
    if record.eps is None:
        return _pair(record, ["u", "b"], 0.5).sum(axis=1)
    e = record.eps
    return (_pair(record, ["u", "v"], 0.5, scales=[1, e]).sum(axis=1)
            + _pair(record, ["b", "c"], 0.5, scales=[1, e]).sum(axis=1))


def persistence_report(record, C: float) -> dict:
    an = record.analyticity
    trace = smallness_trace(record)
    thr = 1.0 / (2 * C**2)
    limit = an.a / an.lam if an.lam > 0 else math.inf
    return {
        "theta_end": an.theta, "a_over_lambda": limit, "persistent": bool(an.theta < limit),
        "smallness_max": float(trace.max()), "smallness_threshold": thr,
        "stays_small": bool(np.all(trace <= thr)), "healthy": bool(record.health["healthy"]),
    }


# --------------------------------------------------------------- calibration


def calibrate_constant(records, path=None, factor: float = 1.5, min_runs: int = 3) -> dict:
    """C = factor * max ratio over a corpus of healthy small-data runs."""
    records = list(records)
    if not records:
        raise ValueError("empty calibration corpus")
    if len(records) < min_runs:
        raise ValueError(f"calibration needs at least {min_runs} runs, got {len(records)}")
    ratios = {}
    for rec in records:
        if not rec.health["healthy"]:
            raise ValueError(f"run {rec.run_id} is not healthy")
        rep = theorem_bound_check(rec, 1 if rec.eps is None else 2)
        if rep["rhs"] == 0:
            raise ValueError(f"run {rec.run_id}: ratio undefined (zero data)")
        ratios[rec.run_id] = rep["ratio"]
    C = factor * max(ratios.values())
    lam = records[0].config.lam
    a = records[0].config.a
    doc = {
        "C_calibrated": C,
        "corpus_ids": list(ratios),
        "date": _dt.date.today().isoformat(),
        "ratios": ratios,
        "smallness_threshold": 1.0 / (2 * C**2),
        "theta_threshold": a / (2 * lam) if lam > 0 else math.inf,
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    return doc


def load_calibration(path) -> float:
    with open(path) as fh:
        return float(json.load(fh)["C_calibrated"])


# ---------------------------------------------------------------- trilinear

LEMMAS = ("3.2", "3.3", "3.4", "4.1")


def _pair_blocks_states(states, names, s, scales=None, dy=False):
    scales = scales or [1.0] * len(names)
    g = states[0].grid
    rows = []
    for st in states:
        e = 0
        for a, n in zip(scales, names):
            c = getattr(st, n).coeffs
            e = e + a**2 * (mode_grad_energy(c, g.h) if dy else mode_energy(c, g.h))
        rows.append(_blocks(e, s, g))
    return np.array(rows)


def _pairing_lhs(states, radii, prod, comp, s, times, R, scale=1.0, eps=None, magnetic=True):
    g = states[0].grid
    part = build_partition(g)
    w = g.period_L * part.weights**2  # (nq, nx)
    vals = []
    for st, r in zip(states, radii):
        parts = nonlinear_terms(st.u.coeffs, st.b.coeffs, r, g, with_vertical=eps is not None,
                                magnetic=magnetic, parts=True)
        ip = _ip(parts[prod], getattr(st, comp).coeffs, g.h)
        vals.append(np.abs(w @ ip))
    vals = scale * np.array(vals) * np.exp(2 * R * np.asarray(times))[:, None]
    per_q = np.trapezoid(vals, times, axis=0) if len(times) > 1 else np.zeros(vals.shape[1])
    return float(per_q @ 2.0 ** (2 * s * part.qs))


def trilinear_check(record, lemma: str, s: float = 0.5, C: float | None = None) -> dict:
    """Direct-quadrature trilinear pairing versus the time-weighted Chemin-Lerner product."""
    lemma = str(lemma)
    if lemma not in LEMMAS:
        raise ValueError(f"unknown lemma {lemma!r}; available: {', '.join(LEMMAS)}")
    if not 0 < s <= 1:
        raise ValidationError("s must lie in (0, 1]")
    idx = record.state_steps
    states = record.states
    if len(states) < 2:
        raise ValueError("trilinear check needs at least two kept states")
    times = np.array([record.times[i] for i in idx])
    hist = record.analyticity.history
    radii = [hist[i]["radius_remaining"] for i in idx]
    rates = np.array([hist[i][f"{record.analyticity.label}_rate"] for i in idx])
    R = record.config.R
    eps = record.eps
    grow = np.exp(R * times)[:, None]
    mag = record.config.magnetic

    def cl(names, scales=None, weight=None):
        b = grow * _pair_blocks_states(states, names, s + 0.5, scales)
        return cl_from_blocks(times, b, 2, weight=weight)

    def dy_rate(name):
        return np.array([besov_blocks(getattr(st, name), 0.5, dy=True).sum() for st in states])

    subs = {}
    if lemma == "3.2":
        th = dy_rate("u")
        subs["3.2"] = (_pairing_lhs(states, radii, "u*dx_u", "u", s, times, R, magnetic=mag, eps=eps),
                       cl(["u"], weight=th) ** 2)
    elif lemma == "3.3":
        th = dy_rate("u")
        subs["3.3"] = (_pairing_lhs(states, radii, "v*dy_u", "u", s, times, R, magnetic=mag, eps=eps),
                       cl(["u"], weight=th) ** 2)
    elif lemma == "3.4":
        subs["3.4 bub"] = (_pairing_lhs(states, radii, "b*dx_u", "b", s, times, R, magnetic=mag, eps=eps),
                           cl(["u"], weight=rates) * cl(["b"], weight=rates))
        subs["3.4 cub"] = (_pairing_lhs(states, radii, "c*dy_u", "b", s, times, R, magnetic=mag, eps=eps),
                           cl(["b"], weight=rates) ** 2)
    else:
        if eps is None:
            raise ValueError("lemma 4.1 needs a scaled run")
        subs["4.1"] = (_pairing_lhs(states, radii, "v*dy_v", "v", s, times, R, scale=eps**2,
                                    eps=eps, magnetic=mag),
                       cl(["u", "v"], scales=[1, eps], weight=rates) ** 2)
    reports = {}
    for name, (lhs, rhs) in subs.items():
        if rhs == 0 and lhs > 1e-300:
            const, ok, flag = math.inf, False, "violation: rhs = 0 with nonzero lhs"
        elif rhs == 0:
            const, ok, flag = 0.0, True, "vacuous"
        else:
            const = lhs / rhs
            ok = None if C is None else bool(const <= C)
            flag = ""
        reports[name] = {"lhs_sum": lhs, "rhs_product": rhs, "empirical_constant": const,
                         "pass": ok, "note": flag}
    return {"run_id": record.run_id, "check": f"trilinear {lemma}", "params": {"s": s},
            "reports": reports}

