"""Decaying Stokes modes of the strip, from the stream-function boundary problem.

For horizontal wavenumber k and m = eps*k, psi'''' - (m^2 + beta^2)... has the
basis cosh(m y), sinh(m y), cos(beta y), sin(beta y) (1, y when m = 0), and the
decay rate is beta^2 + m^2 for each root of the 4x4 wall determinant.
"""

import numpy as np
from scipy.optimize import brentq


def _basis(m, beta, y):
    if m == 0:
        f = [np.ones_like(y), y, np.cos(beta * y), np.sin(beta * y)]
        df = [np.zeros_like(y), np.ones_like(y), -beta * np.sin(beta * y), beta * np.cos(beta * y)]
    else:
        f = [np.cosh(m * y), np.sinh(m * y), np.cos(beta * y), np.sin(beta * y)]
        df = [m * np.sinh(m * y), m * np.cosh(m * y), -beta * np.sin(beta * y), beta * np.cos(beta * y)]
    return np.array(f), np.array(df)


def _matrix(m, beta):
    f0, d0 = _basis(m, beta, np.array(0.0))
    f1, d1 = _basis(m, beta, np.array(1.0))
    return np.array([f0, d0, f1, d1], dtype=float)


def roots(m, beta_max=12.0, n=4000):
    det = lambda b: np.linalg.det(_matrix(m, b))
    grid = np.linspace(0.5, beta_max, n)
    vals = [det(b) for b in grid]
    out = []
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa == 0 or fa * fb < 0:
            out.append(brentq(det, a, b, xtol=1e-14))
    return out


def mode(m, beta, y):
    """Horizontal velocity profile u = psi' of the mode (unnormalized)."""
    _, _, vh = np.linalg.svd(_matrix(m, beta))
    coef = vh[-1]
    _, df = _basis(m, beta, y)
    return coef @ df
