"""On-disk layout of a run directory and reconstruction of a RunRecord from it.

    <out>/<run_id>/manifest.json     resolved config, outputs, health
    <out>/<run_id>/norms.csv         NormSeries (time, tag, value)
    <out>/<run_id>/energies.npz      per-step mode energies and radius history
    <out>/<run_id>/snapshots/step_NNNNNNN.snap
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .analyticity import AnalyticityState
from .besov import NormSeries
from .runner import RunRecord, parse_config
from .state import read_snapshot, write_snapshot


def unique_run_id(out_dir, base: str) -> str:
    out = Path(out_dir)
    rid, i = base, 1
    while (out / rid).exists():
        i += 1
        rid = f"{base}-{i}"
    return rid


def _atomic_json(path: Path, doc):
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    tmp.replace(path)


def save_run(rec: RunRecord, run_dir) -> dict:
    d = Path(run_dir)
    (d / "snapshots").mkdir(parents=True, exist_ok=True)
    an = rec.analyticity
    hist = an.history
    snaps = []
    for step, st in zip(rec.state_steps, rec.states):
        p = d / "snapshots" / f"step_{step:07d}.snap"
        h = hist[step] if step < len(hist) else hist[-1]
        write_snapshot(p, st, an.a, an.lam, h[an.label])
        snaps.append(str(p.relative_to(d)))
    if rec.series is not None:
        rec.series.to_csv(d / "norms.csv")
    arrays = {f"e_{k}": np.array(v) for k, v in rec.energies.items()}
    arrays.update({f"dt_{k}": np.array(v) for k, v in rec.dt_energies.items()})
    arrays["times"] = np.array(rec.times)
    arrays["dt_times"] = np.array(rec.dt_times)
    arrays["theta"] = np.array([h[an.label] for h in hist])
    arrays["rate"] = np.array([h[f"{an.label}_rate"] for h in hist])
    arrays["radius"] = np.array([h["radius_remaining"] for h in hist])
    arrays["state_steps"] = np.array(rec.state_steps, dtype=np.int64)
    np.savez(d / "energies.npz", **arrays)
    manifest = {
        "run_id": rec.run_id,
        "config": rec.config.to_dict(),
        "flavor": rec.config.flavor,
        "outputs": {"snapshots": snaps, "norms": "norms.csv", "energies": "energies.npz"},
        "health": dict(rec.health),
        "last_snapshot": snaps[-1] if snaps else None,
        "smallness": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                      for k, v in rec.smallness.items()},
        "theta_end": an.theta,
        "radius_end": an.radius,
    }
    _atomic_json(d / "manifest.json", manifest)
    return manifest


def load_run(run_dir) -> RunRecord:
    d = Path(run_dir)
    man = json.loads((d / "manifest.json").read_text())
    cfg = parse_config(man["config"])
    rec = RunRecord(cfg, man["run_id"])
    z = np.load(d / "energies.npz")
    rec.times = list(z["times"])
    for key in z.files:
        if key.startswith("e_"):
            rec.energies[key[2:]] = list(z[key])
        elif key.startswith("dt_") and key != "dt_times":
            rec.dt_energies[key[3:]] = list(z[key])
    rec.dt_times = list(z["dt_times"])
    label = "theta" if cfg.epsilon is None else "tau"
    hist = [
        {"time": t, label: th, f"{label}_rate": r, "radius_remaining": rad}
        for t, th, r, rad in zip(z["times"], z["theta"], z["rate"], z["radius"])
    ]
    an = AnalyticityState(cfg.a, cfg.lam, theta=float(z["theta"][-1]), time=float(z["times"][-1]),
                          healthy=bool(z["radius"][-1] > 0),
                          label=label, history=hist)
    rec.analyticity = an
    rec.health = man["health"]
    rec.smallness = man.get("smallness", {})
    rec.state_steps = [int(s) for s in z["state_steps"]]
    rec.states = [read_snapshot(d / p)[0] for p in man["outputs"]["snapshots"]]
    rec.final_state = rec.states[-1] if rec.states else None
    if (d / "norms.csv").exists():
        rec.series = NormSeries.from_csv(d / "norms.csv")
    return rec


def find_run(run_id, roots=(".",)) -> Path:
    p = Path(run_id)
    if (p / "manifest.json").exists():
        return p
    for r in roots:
        q = Path(r) / run_id
        if (q / "manifest.json").exists():
            return q
    raise FileNotFoundError(f"no run directory with a manifest for {run_id!r}")


def ensure_dir(path) -> Path:
    os.makedirs(path, exist_ok=True)
    return Path(path)
