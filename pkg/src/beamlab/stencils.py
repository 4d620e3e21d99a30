"""Finite-difference stencils on uniform grids."""

from __future__ import annotations

import numpy as np


def d1(f: np.ndarray, dx: float, axis: int) -> np.ndarray:
    """First derivative: fourth order inside, second order on the two outer layers."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dx)
    out[1] = (f[2] - f[0]) / (2 * dx)
    out[-2] = (f[-1] - f[-3]) / (2 * dx)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dx)
    return np.moveaxis(out, 0, axis)


def d2(f: np.ndarray, dx: float, axis: int) -> np.ndarray:
    """Second derivative: fourth order inside, second order next to the edge, copied on it."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * dx * dx)
    out[1] = (f[0] - 2 * f[1] + f[2]) / (dx * dx)
    out[-2] = (f[-3] - 2 * f[-2] + f[-1]) / (dx * dx)
    out[0] = out[1]
    out[-1] = out[-2]
    return np.moveaxis(out, 0, axis)


def interior(a: np.ndarray, width: int = 2) -> np.ndarray:
    """Drop ``width`` layers on every side."""
    sl = tuple(slice(width, -width) for _ in range(a.ndim))
    return a[sl]


def derivative_along(values: np.ndarray, ds: float) -> np.ndarray:
    """Fourth-order derivative of samples on a uniform 1-D grid (axis 0), one-sided at the ends."""
    v = np.asarray(values)
    out = d1(v, ds, 0)
    if v.shape[0] >= 5:
        out[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * ds)
        out[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * ds)
        out[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * ds)
        out[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * ds)
    return out
