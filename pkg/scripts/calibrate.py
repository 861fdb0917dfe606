"""Freeze the Theorem-1 constant from the mode corpus, then score fresh profiles.

    python3 scripts/calibrate.py -o calibration.json [--t-end 5] [--nx 64 --ny 32]
"""

import argparse

from mhdstrip.energy import calibrate_constant, load_calibration, theorem_bound_check
from mhdstrip.runner import parse_config, simulate

CORPUS = ("mode1", "mode2", "mode3")
FRESH = ("packet", "mixed", "random")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-o", "--out", default="calibration.json")
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--nx", type=int, default=64)
    ap.add_argument("--ny", type=int, default=32)
    ap.add_argument("--delta", type=float, default=1e-3)
    args = ap.parse_args()

    def run(profile):
        cfg = parse_config({"grid": {"nx": args.nx, "ny": args.ny},
                            "run": {"dt": args.dt, "t_end": args.t_end},
                            "data": {"delta": args.delta, "profile": profile}})
        return simulate(cfg, profile)

    corpus = [run(p) for p in CORPUS]
    calibrate_constant(corpus, args.out)
    C = load_calibration(args.out)
    print(f"C_calibrated = {C:.4f}  -> {args.out}")
    for p, rec in zip(CORPUS, corpus):
        print(f"  {p:8s} ratio {theorem_bound_check(rec, 1, C=C)['ratio']:.4f}  (corpus)")
    for p in FRESH:
        r = theorem_bound_check(run(p), 1, C=C)["ratio"]
        print(f"  {p:8s} ratio {r:.4f}  {'ok' if r <= C else 'EXCEEDS'}")


if __name__ == "__main__":
    main()
