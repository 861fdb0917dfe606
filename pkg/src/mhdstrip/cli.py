"""Command line: ``python -m mhdstrip {run,sweep,check}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .convergence import SweepPlan, run_sweep
from .energy import (
    all_budgets,
    block_budget,
    load_calibration,
    persistence_report,
    theorem_bound_check,
    trilinear_check,
)
from .grid import ConfigError
from .runner import parse_config, simulate
from .store import _atomic_json, find_run, load_run, save_run, unique_run_id

CHECKS = ("budget", "theorem", "trilinear", "persistence")


def _load_config(path, seed=None):
    with open(path) as fh:
        doc = json.load(fh)
    if seed is not None:
        doc.setdefault("data", {})["seed"] = seed
    return parse_config(doc)


def cmd_run(config_path, out_dir, seed=None, run_id=None) -> dict:
    cfg = _load_config(config_path, seed)
    os.makedirs(out_dir, exist_ok=True)
    rid = run_id or unique_run_id(out_dir, Path(config_path).stem)
    rec = simulate(cfg, rid)
    return save_run(rec, Path(out_dir) / rid)


def cmd_sweep(config_path, out_dir, threads=1, seed=None) -> dict:
    cfg = _load_config(config_path, seed)
    if not cfg.epsilons:
        raise ConfigError("sweep config needs sweep.epsilons")
    plan = SweepPlan(cfg.with_(epsilon=None), cfg.epsilons, cfg.mu)
    summary = run_sweep(plan, out_dir, workers=min(threads, len(plan.epsilons)))
    _atomic_json(Path(out_dir) / "sweep_manifest.json",
                 {"config": cfg.to_dict(), "outputs": {"csv": "sweep.csv", "fit": "fit.json"}})
    return summary


def _parse_check(check: str, params: list[str]):
    toks = check.split()
    if not toks:
        raise ValueError(f"empty check; available: {', '.join(CHECKS)}")
    name, pos, kv = toks[0], [], {}
    for t in toks[1:] + list(params):
        if "=" in t:
            k, v = t.split("=", 1)
            kv[k] = v
        else:
            pos.append(t)
    if name not in CHECKS:
        raise ValueError(f"unknown check {name!r}; available: {', '.join(CHECKS)}")
    return name, pos, kv


def cmd_check(run_id, check, params=(), roots=(".",)) -> dict:
    name, pos, kv = _parse_check(check, list(params))
    run_dir = find_run(run_id, roots)
    rec = load_run(run_dir)
    C = float(kv["C"]) if "C" in kv else (load_calibration(kv["calibration"]) if "calibration" in kv else None)
    if name == "budget":
        width = int(kv.get("width", 10))
        qs = [int(kv["q"])] if "q" in kv else None
        buds = all_budgets(rec, width) if qs is None else [
            block_budget(rec, qs[0], (n0, n0 + width))
            for n0 in range(0, len(rec.times) - width, width)]
        tol = float(kv.get("tol", 1e-6))
        worst = max((abs(b.residual) / b.scale if b.scale else 0.0) for b in buds) if buds else 0.0
        report = {"run_id": rec.run_id, "check": check, "params": kv, "windows": len(buds),
                  "worst_relative_residual": worst, "pass": bool(all(b.ok(tol) for b in buds)),
                  "budgets": [{"q": b.q, "window": list(b.window), "terms": b.terms,
                               "residual": b.residual} for b in buds]}
    elif name == "theorem":
        k = int(pos[0] if pos else kv.get("k", 1))
        lim = load_run(find_run(kv["limit"], roots)) if k == 3 else None
        report = theorem_bound_check(rec, k, C=C, limit_record=lim)
    elif name == "trilinear":
        lemma = pos[0] if pos else kv.get("lemma", "3.2")
        report = trilinear_check(rec, lemma, float(kv.get("s", 0.5)), C=C)
    else:
        report = persistence_report(rec, C if C is not None else rec.config.C)
    rdir = Path(run_dir) / "reports"
    rdir.mkdir(exist_ok=True)
    fname = "_".join([name] + pos + [f"{k}-{v}" for k, v in sorted(kv.items())]) + ".json"
    _atomic_json(rdir / fname.replace("/", "-"), report)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mhdstrip")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=None)
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="one limit or scaled run")
    r.add_argument("-c", "--config", required=True)
    r.add_argument("-o", "--out", required=True)
    s = sub.add_parser("sweep", help="matched eps sweep and rate fit")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--out", required=True)
    c = sub.add_parser("check", help="energy-monitor check on a recorded run")
    c.add_argument("-r", "--run", required=True)
    c.add_argument("-k", "--check", required=True)
    c.add_argument("--param", action="append", default=[], metavar="K=V")
    c.add_argument("--root", action="append", default=["."])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            out = cmd_run(args.config, args.out, args.seed)
        elif args.cmd == "sweep":
            out = cmd_sweep(args.config, args.out, args.threads, args.seed)
            out = {k: v for k, v in out.items() if k != "rows"}
        else:
            out = cmd_check(args.run, args.check, args.param, args.root)
            out = {k: v for k, v in out.items() if k != "budgets"}
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(out, indent=2, default=str))
    return 0
