"""Observed time and wall-normal orders of both steppers on the manufactured solution."""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import mms  # noqa: E402

from mhdstrip.grid import GridSpec  # noqa: E402

if __name__ == "__main__":
    g = GridSpec(2 * np.pi, 16, 31)
    for eps in (None, 0.3):
        name = "limit " if eps is None else f"eps={eps}"
        print(f"{name}  dt order {mms.dt_order(g, 0.02, 0.4, eps):.3f}")
        orders, errs = mms.dy_order([15, 31, 63], 1e-3, 0.2, eps)
        print(f"{name}  dy errors {['%.3e' % e for e in errs]}  orders {['%.3f' % o for o in orders]}")
