"""Run configuration, time loop and in-memory run records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analyticity import AnalyticityState
from .besov import NormSeries, besov_blocks, iter_block_tags
from .grid import ConfigError, GridSpec, mode_energy, mode_grad_energy
from .imex import Diverged, ImexStepper, RadiusExhausted
from .lp import build_partition
from .profiles import PROFILES, initial_fields
from .scaled import smallness, weighted_state
from .state import MhdState

SCHEMA = {
    "grid": {"L", "nx", "ny"},
    "run": {"dt", "t_end", "R", "a", "lambda", "epsilon", "snapshot_every", "C"},
    "data": {"delta", "profile", "seed"},
    "switches": {"nonlinear", "magnetic"},
    "sweep": {"epsilons", "mu"},
}
REQUIRED = [("grid", "nx"), ("grid", "ny"), ("run", "dt"), ("run", "t_end"),
            ("data", "delta"), ("data", "profile")]


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    dt: float
    t_end: float
    delta: float
    profile: str
    R: float = 1.0
    a: float = 0.5
    lam: float = 4.0
    epsilon: float | None = None
    snapshot_every: int = 0  # 0: initial and final state only
    C: float = 1.0
    seed: int = 0
    nonlinear: bool = True
    magnetic: bool = True
    epsilons: tuple = ()
    mu: float | None = None

    @property
    def flavor(self) -> str:
        return "limit" if self.epsilon is None else "scaled"

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_(self, **kw) -> "RunConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return RunConfig(**d)

    def to_dict(self) -> dict:
        out = {
            "grid": {"L": self.grid.period_L, "nx": self.grid.nx, "ny": self.grid.ny},
            "run": {"dt": self.dt, "t_end": self.t_end, "R": self.R, "a": self.a,
                    "lambda": self.lam, "snapshot_every": self.snapshot_every, "C": self.C},
            "data": {"delta": self.delta, "profile": self.profile, "seed": self.seed},
            "switches": {"nonlinear": self.nonlinear, "magnetic": self.magnetic},
        }
        if self.epsilon is not None:
            out["run"]["epsilon"] = self.epsilon
        if self.epsilons:
            out["sweep"] = {"epsilons": list(self.epsilons)}
            if self.mu is not None:
                out["sweep"]["mu"] = self.mu
        return out


def parse_config(doc: dict) -> RunConfig:
    unknown = []
    for sec, body in doc.items():
        if sec not in SCHEMA:
            unknown.append(sec)
        elif not isinstance(body, dict):
            raise ConfigError(f"section {sec!r} must be an object")
        else:
            unknown += [f"{sec}.{k}" for k in body if k not in SCHEMA[sec]]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    missing = [f"{s}.{k}" for s, k in REQUIRED if k not in doc.get(s, {})]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    g, r, d = doc["grid"], doc["run"], doc["data"]
    sw, sweep = doc.get("switches", {}), doc.get("sweep", {})
    grid = GridSpec(float(g.get("L", 2 * math.pi)), int(g["nx"]), int(g["ny"]))
    if d["profile"] not in PROFILES:
        raise ConfigError(f"unknown profile {d['profile']!r}; known: {', '.join(PROFILES)}")
    eps = r.get("epsilon")
    if eps is not None and not 0 < eps <= 1:
        raise ConfigError(f"run.epsilon must lie in (0, 1], got {eps}")
    eps_list = tuple(float(e) for e in sweep.get("epsilons", ()))
    if eps_list and any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("sweep.epsilons must be strictly decreasing")
    if any(not 0 < e <= 1 for e in eps_list):
        raise ConfigError("sweep.epsilons must lie in (0, 1]")
    cfg = RunConfig(
        grid=grid, dt=float(r["dt"]), t_end=float(r["t_end"]), delta=float(d["delta"]),
        profile=d["profile"], R=float(r.get("R", 1.0)), a=float(r.get("a", 0.5)),
        lam=float(r.get("lambda", 4.0)), epsilon=None if eps is None else float(eps),
        snapshot_every=int(r.get("snapshot_every", 0)), C=float(r.get("C", 1.0)),
        seed=int(d.get("seed", 0)), nonlinear=bool(sw.get("nonlinear", True)),
        magnetic=bool(sw.get("magnetic", True)), epsilons=eps_list,
        mu=None if sweep.get("mu") is None else float(sweep["mu"]),
    )
    if not cfg.dt > 0 or not cfg.t_end > 0:
        raise ConfigError("run.dt and run.t_end must be positive")
    if cfg.a <= 0 or cfg.lam < 0:
        raise ConfigError("run.a must be positive and run.lambda nonnegative")
    return cfg


@dataclass
class RunRecord:
    """Everything a check needs: per-step mode energies, radius history and kept states."""

    config: RunConfig
    run_id: str = "run"
    times: list[float] = field(default_factory=list)
    energies: dict[str, list[np.ndarray]] = field(default_factory=dict)
    dt_times: list[float] = field(default_factory=list)
    dt_energies: dict[str, list[np.ndarray]] = field(default_factory=dict)
    analyticity: AnalyticityState | None = None
    states: list[MhdState] = field(default_factory=list)
    state_steps: list[int] = field(default_factory=list)
    health: dict = field(default_factory=lambda: {"healthy": True, "radius_exhausted": False,
                                                  "diverged": False})
    smallness: dict = field(default_factory=dict)
    final_state: MhdState | None = None
    series: NormSeries | None = None

    @property
    def grid(self) -> GridSpec:
        return self.config.grid

    @property
    def eps(self) -> float | None:
        return self.config.epsilon

    @property
    def initial(self) -> MhdState:
        return self.states[0]

    def energy(self, name: str) -> np.ndarray:
        return np.array(self.energies[name])

    def rates(self) -> np.ndarray:
        """Radius-loss rate applied over each step, aligned with ``times``."""
        key = f"{self.analyticity.label}_rate"
        return np.array([h[key] for h in self.analyticity.history])

    def radii(self) -> np.ndarray:
        return np.array([h["radius_remaining"] for h in self.analyticity.history])


def log_energies(state: MhdState, eps: float | None) -> dict[str, np.ndarray]:
    h = state.grid.h
    names = ("u", "b") if eps is None else ("u", "v", "b", "c")
    out = {}
    for n in names:
        c = getattr(state, n).coeffs
        out[n] = mode_energy(c, h)
        out["dy_" + n] = mode_grad_energy(c, h)
    return out


def _unweighted(state: MhdState, radius: float, names=("u", "b")):
    g = state.grid
    m = np.exp(-radius * g.kabs)[:, None]
    return {n: getattr(state, n).coeffs * m for n in names}


def initial_state(cfg: RunConfig) -> MhdState:
    u0, b0 = initial_fields(cfg.profile, cfg.delta, cfg.grid, cfg.seed)
    return weighted_state(u0, b0, cfg.a, cfg.flavor)


class Simulation:
    """Steppable run: owns the stepper, the radius state and the record being built."""

    def __init__(self, cfg: RunConfig, run_id: str = "run", keep_every: int | None = None,
                 forcing: Callable | None = None, state0: MhdState | None = None,
                 series: bool = True):
        self.cfg = cfg
        self.keep = keep_every if keep_every is not None else cfg.snapshot_every
        self.state = state0 if state0 is not None else initial_state(cfg)
        self.an = AnalyticityState(cfg.a, cfg.lam, label="theta" if cfg.epsilon is None else "tau")
        self.stepper = ImexStepper(cfg.grid, cfg.dt, cfg.epsilon, cfg.nonlinear, cfg.magnetic, forcing)
        self.rec = rec = RunRecord(cfg, run_id, analyticity=self.an)
        self.step_index = 0
        st = self.state
        rec.smallness = {
            "data_norm": smallness(st.u, st.v, st.b, st.c, cfg.epsilon or 0.0),
            "threshold": cfg.a / (2 * cfg.C**2),
        }
        rec.smallness["outside_theory"] = rec.smallness["data_norm"] > rec.smallness["threshold"]
        self.part = build_partition(cfg.grid)
        self._tags = (iter_block_tags("u", self.part.qs), iter_block_tags("b", self.part.qs))
        if series:
            rec.series = NormSeries(meta={"q_range": [self.part.q_min, self.part.q_max],
                                          "flavor": cfg.flavor})
        self._record(st, 0, 0.0)

    @property
    def done(self) -> bool:
        return self.step_index >= self.cfg.n_steps or not self.rec.health["healthy"]

    def _record(self, st, step, rate):
        rec, an = self.rec, self.an
        rec.times.append(st.time)
        for k, v in log_energies(st, self.cfg.epsilon).items():
            rec.energies.setdefault(k, []).append(v)
        if rec.series is not None:
            vals = dict(zip(self._tags[0], besov_blocks(st.u, 0.5, partition=self.part)))
            vals.update(zip(self._tags[1], besov_blocks(st.b, 0.5, partition=self.part)))
            vals.update({an.label: an.theta, f"{an.label}_rate": rate,
                         "radius_remaining": max(an.radius, 0.0)})
            rec.series.append(st.time, vals)
        if (self.keep and step % self.keep == 0) or step == 0:
            rec.states.append(st)
            rec.state_steps.append(step)

    def step(self) -> bool:
        """Advance one step; returns False (and marks health) if the run had to stop."""
        cfg, rec, an, grid = self.cfg, self.rec, self.an, self.cfg.grid
        state = self.state
        r_old = an.radius
        prev = _unweighted(state, r_old)
        try:
            new = self.stepper.step(state, an)
        except RadiusExhausted:
            rec.health.update(healthy=False, radius_exhausted=True)
            return False
        except Diverged:
            rec.health.update(healthy=False, diverged=True)
            return False
        if rec.series is not None:
            # the applied rate is now known for the previous entry
            rec.series.entries[-1][f"{an.label}_rate"] = self.stepper.last_rate
        cur = _unweighted(new, an.radius)
        w = np.exp(0.5 * (r_old + an.radius) * grid.kabs)[:, None]
        rec.dt_times.append(state.time + 0.5 * cfg.dt)
        for k in ("u", "b"):
            d = (cur[k] - prev[k]) / cfg.dt * w
            rec.dt_energies.setdefault(k, []).append(mode_energy(d, grid.h))
        self.state = new
        self.step_index += 1
        self._record(new, self.step_index, self.stepper.last_rate)
        return True

    def finish(self) -> RunRecord:
        rec = self.rec
        if rec.state_steps[-1] != self.step_index:
            rec.states.append(self.state)
            rec.state_steps.append(self.step_index)
        rec.final_state = self.state
        return rec


def simulate(cfg: RunConfig, run_id: str = "run", keep_every: int | None = None,
             forcing: Callable | None = None, state0: MhdState | None = None) -> RunRecord:
    """Run one limit (epsilon None) or scaled configuration and record it."""
    sim = Simulation(cfg, run_id, keep_every, forcing, state0)
    while not sim.done:
        sim.step()
    return sim.finish()
