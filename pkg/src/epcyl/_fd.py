"""Finite-difference stencils on uniform grids.

Centered stencils in the interior, one-sided stencils of the same accuracy
near the ends. An end can instead be mirrored with even or odd parity,
which keeps centered stencils valid up to a symmetry line (the axis r=0,
or a Neumann end).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def fornberg_weights(x0: float, x, m: int) -> np.ndarray:
    """Weights of the m-th derivative at x0 for nodes x (Fornberg 1988).

    Returns an array of shape (m+1, len(x)); row k holds the k-th
    derivative weights.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@lru_cache(maxsize=None)
def _weights(order: int, offsets: tuple) -> np.ndarray:
    return fornberg_weights(0.0, np.array(offsets, dtype=float), order)[order]


def _half_width(order: int, accuracy: int) -> int:
    return (order + 1) // 2 + accuracy // 2 - 1


def derivative(f, h: float, axis: int = 0, order: int = 1, accuracy: int = 4,
               left: str | None = None, right: str | None = None) -> np.ndarray:
    """Derivative of `order` along `axis` of samples with spacing h.

    Parameters
    ----------
    f : array_like
        Samples on a uniform grid.
    h : float
        Grid spacing.
    axis : int
        Axis to differentiate along.
    order : int
        Derivative order (0 returns a copy).
    accuracy : int
        Formal order of accuracy (even).
    left, right : {None, "even", "odd"}
        Mirror the samples across that end with the given parity instead
        of switching to one-sided stencils.
    """
    f = np.asarray(f, dtype=float)
    if order == 0:
        return f.copy()
    g = np.moveaxis(f, axis, 0)
    n = g.shape[0]
    p = _half_width(order, accuracy)
    padl = padr = 0
    if left in ("even", "odd"):
        s = 1.0 if left == "even" else -1.0
        padl = min(p, n - 1)
        g = np.concatenate([s * g[padl:0:-1], g], axis=0)
    if right in ("even", "odd"):
        s = 1.0 if right == "even" else -1.0
        padr = min(p, n - 1)
        g = np.concatenate([g, s * g[-2:-2 - padr:-1]], axis=0)
    N = g.shape[0]
    npts = order + accuracy
    if N < min(2 * p + 1, npts):
        raise ValueError(f"need at least {npts} samples for order {order}")
    out = np.zeros_like(g)
    if N >= 2 * p + 1:
        w = _weights(order, tuple(range(-p, p + 1)))
        for k, wk in enumerate(w):
            out[p:N - p] += wk * g[k:N - 2 * p + k]
        rows = list(range(p)) + list(range(N - p, N))
    else:
        rows = list(range(N))
    npts = min(npts, N)
    for i in rows:
        start = 0 if i < N / 2 else N - npts
        offs = tuple(range(start - i, start - i + npts))
        w = _weights(order, offs)
        out[i] = np.tensordot(w, g[start:start + npts], axes=(0, 0))
    out = out[padl:N - padr] / h ** order
    return np.moveaxis(out, 0, axis)


def midpoints(f, axis: int = 0) -> np.ndarray:
    """Fourth-order interpolation of samples to the cell midpoints."""
    g = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    n = g.shape[0]
    if n < 4:
        out = 0.5 * (g[1:] + g[:-1])
        return np.moveaxis(out, 0, axis)
    out = np.empty((n - 1,) + g.shape[1:])
    out[1:-1] = (-g[:-3] + 9.0 * g[1:-2] + 9.0 * g[2:-1] - g[3:]) / 16.0
    out[0] = (5.0 * g[0] + 15.0 * g[1] - 5.0 * g[2] + g[3]) / 16.0
    out[-1] = (5.0 * g[-1] + 15.0 * g[-2] - 5.0 * g[-3] + g[-4]) / 16.0
    return np.moveaxis(out, 0, axis)


def cumulative_integral(y, h: float, axis: int = -1) -> np.ndarray:
    """Running integral from the first sample, exact for cubics.

    Each cell uses the cubic through four neighbouring samples; the
    first and last cells use the one-sided four-point cubic.
    """
    g = np.moveaxis(np.asarray(y, dtype=float), axis, 0)
    n = g.shape[0]
    if n < 4:
        raise ValueError("need at least 4 samples")
    cell = np.empty((n - 1,) + g.shape[1:])
    cell[1:-1] = (-g[:-3] + 13.0 * g[1:-2] + 13.0 * g[2:-1] - g[3:]) / 24.0
    cell[0] = (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]) / 24.0
    cell[-1] = (9.0 * g[-1] + 19.0 * g[-2] - 5.0 * g[-3] + g[-4]) / 24.0
    out = np.zeros_like(g)
    out[1:] = h * np.cumsum(cell, axis=0)
    return np.moveaxis(out, 0, axis)
