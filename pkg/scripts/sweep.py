"""Matched eps sweep; prints the fitted rate for E_total and for the product form."""

import argparse
import json

from mhdstrip.convergence import SweepPlan, fit_rate, run_sweep
from mhdstrip.runner import parse_config

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("-c", "--config", default="scripts/configs/sweep_mode1.json")
    ap.add_argument("-o", "--out", default="sweep_out")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    with open(args.config) as fh:
        cfg = parse_config(json.load(fh))
    out = run_sweep(SweepPlan(cfg.with_(epsilons=()), cfg.epsilons, cfg.mu), args.out, args.workers)
    for r in out["rows"]:
        print(f"eps {r['epsilon']:<7g} E_total {r['E_total']:.4e}  E_product {r['E_product']:.4e}")
    prod = fit_rate([(r["epsilon"], r["E_product"]) for r in out["rows"]])
    print(f"E_total   slope {out['slope']:.3f} +/- {out['ci']:.3f}  r2 {out['r2']:.5f}")
    print(f"E_product slope {prod['slope']:.3f} +/- {prod['ci']:.3f}  r2 {prod['r2']:.5f}")
