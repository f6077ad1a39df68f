"""Discrete weighted Sobolev norms on cylinder grids.

Fields live on uniform tensor grids over [0, L] x cross-section. Two
cross-section layouts are supported:

* ``"square"``: values of shape (n1, n2, n3) on [0, L] x [0, 1]^2;
* ``"axisym"``: values of shape (n1, nr) on [0, L] x [0, 1] in (x1, r),
  with cross-section measure 2 pi r dr and derivatives d_x1^a d_r^b.

All L2 integrals use composite Simpson product quadrature and
derivatives use fourth-order finite differences.
"""

from __future__ import annotations

from itertools import product

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from . import _fd
from .errors import ConfigError, ShapeError

MAX_ORDER = 4


class GridField:
    """Samples of a scalar field with a derivative cache.

    Parameters
    ----------
    values : array_like
        Shape (n1, n2, n3) for ``"square"`` or (n1, nr) for ``"axisym"``.
    L : float
        Cylinder length; x1 spans [0, L].
    cross_section : {"square", "axisym"}
    width : float
        Side of the square or radius of the disk (default 1).
    """

    def __init__(self, values, L: float, cross_section: str = "square", width: float = 1.0):
        v = np.asarray(values, dtype=float)
        if cross_section == "square":
            if v.ndim != 3:
                raise ShapeError("square fields need shape (n1, n2, n3)")
        elif cross_section == "axisym":
            if v.ndim != 2:
                raise ShapeError("axisym fields need shape (n1, nr)")
        else:
            raise ConfigError(f"unknown cross-section {cross_section!r}")
        if L <= 0 or width <= 0:
            raise ConfigError("grid extents must be positive")
        if min(v.shape) < 2 * MAX_ORDER + 1:
            raise ShapeError(f"need at least {2 * MAX_ORDER + 1} points per axis")
        self.values = v
        self.L = float(L)
        self.cross_section = cross_section
        self.width = float(width)
        self.spacing = tuple([self.L / (v.shape[0] - 1)]
                             + [self.width / (n - 1) for n in v.shape[1:]])
        self._cache: dict = {}

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.values.shape[0])

    def axis_grid(self, axis: int) -> np.ndarray:
        if axis == 0:
            return self.x1
        return np.linspace(0.0, self.width, self.values.shape[axis])

    def scaled(self, c: float) -> "GridField":
        return GridField(c * self.values, self.L, self.cross_section, self.width)

    def deriv(self, alpha: tuple) -> np.ndarray:
        """Mixed derivative with multi-index `alpha` (one entry per axis)."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.ndim:
            raise ShapeError("multi-index length must equal field dimension")
        if sum(alpha) > MAX_ORDER:
            raise ConfigError(f"derivative order above {MAX_ORDER}")
        if alpha in self._cache:
            return self._cache[alpha]
        if sum(alpha) == 0:
            out = self.values
        else:
            # peel one derivative off the last nonzero axis and reuse the cache
            ax = max(i for i, a in enumerate(alpha) if a > 0)
            lower = list(alpha)
            lower[ax] -= 1
            out = _fd.derivative(self.deriv(tuple(lower)), self.spacing[ax], axis=ax, order=1)
        self._cache[alpha] = out
        return out

    # quadrature helpers
    def slice_integral(self, g) -> np.ndarray:
        """Cross-section integral of g at every x1 sample."""
        g = np.asarray(g, dtype=float)
        if self.cross_section == "square":
            y2, y3 = self.axis_grid(1), self.axis_grid(2)
            return simpson(simpson(g, x=y3, axis=2), x=y2, axis=1)
        r = self.axis_grid(1)
        return simpson(2.0 * np.pi * r * g, x=r, axis=1)

    def volume_integral(self, g) -> float:
        return float(simpson(self.slice_integral(g), x=self.x1))


def _multi_indices(ndim: int, order: int, axes=None):
    axes = range(ndim) if axes is None else axes
    axes = list(axes)
    out = []
    for combo in product(range(order + 1), repeat=len(axes)):
        if sum(combo) == order:
            alpha = [0] * ndim
            for ax, a in zip(axes, combo):
                alpha[ax] = a
            out.append(tuple(alpha))
    return out


def _check(field: GridField, k: int, lo: int = 0):
    if not isinstance(field, GridField):
        raise ShapeError("expected a GridField")
    if k < lo or k > MAX_ORDER:
        raise ConfigError(f"order must lie in [{lo}, {MAX_ORDER}]")


def _sq_sum(field: GridField, alphas) -> np.ndarray:
    return sum(field.deriv(a) ** 2 for a in alphas)


def hk_norm(field: GridField, k: int) -> float:
    """Plain H^k norm: sqrt of the sum of squared L2 norms up to order k."""
    _check(field, k)
    tot = 0.0
    for j in range(k + 1):
        tot += field.volume_integral(_sq_sum(field, _multi_indices(field.ndim, j)))
    return float(np.sqrt(max(tot, 0.0)))


def _polished_sup(x: np.ndarray, L: float, cum: np.ndarray) -> float:
    """sup over t in [0, L] of (L - t) * C(t) for cumulative integral samples C."""
    g = (L - x) * cum
    j = int(np.argmax(g))
    best = float(g[j])
    if 0 < j < x.size - 1:
        spl = CubicSpline(x, cum)
        res = minimize_scalar(lambda t: -(L - t) * spl(t), bounds=(x[j - 1], x[j + 1]),
                              method="bounded", options={"xatol": 1e-13})
        best = max(best, float(-res.fun))
    return best


def weighted_top_term(field: GridField, k: int) -> float:
    """sup_{0<d<L} d^{1/2} ||D^k phi||_{L2(Omega_{L-d})}."""
    dens = field.slice_integral(_sq_sum(field, _multi_indices(field.ndim, k)))
    cum = cumulative_simpson(dens, x=field.x1, initial=0.0)
    cum = np.maximum.accumulate(np.maximum(cum, 0.0))
    return float(np.sqrt(_polished_sup(field.x1, field.L, cum)))


def h_star_norm(field: GridField, k: int) -> float:
    """Weighted norm ||phi||_{H^{k-1}} + sup_d d^{1/2} ||D^k phi||_{L2(Omega_{L-d})}.

    Parameters
    ----------
    field : GridField
    k : int
        Order, 1 <= k <= 4.

    Notes
    -----
    The sup over d is taken over the grid and then polished by a bounded
    scalar search on a cubic spline of the cumulative integral.
    """
    _check(field, k, lo=1)
    return hk_norm(field, k - 1) + weighted_top_term(field, k)


def slice_norms(field: GridField, alphas) -> np.ndarray:
    """||(d^alpha phi)(s, .)||_{L2(D)} summed in quadrature over `alphas`, per x1."""
    return np.sqrt(np.maximum(field.slice_integral(_sq_sum(field, alphas)), 0.0))


def starred_sup(field: GridField, n: np.ndarray) -> float:
    """sup_d d^{1/2} esssup_{s<L-d} n(s), realized on the grid (d = L included)."""
    run = np.maximum.accumulate(n)
    d = field.L - field.x1
    return float(np.max(np.sqrt(d) * run))


def w_star_norm(field: GridField, m: int) -> float:
    """Weighted slice norm sum_j ||d_1^j phi||_{L*inf((0,L); H^{m-j}(D))}.

    For each j the lower cross-section orders i < m - j enter through the
    plain sup over s, and the top order m - j enters through the starred
    sup with the d^{1/2} weight.
    """
    _check(field, m)
    xs_axes = list(range(1, field.ndim))
    total = 0.0
    for j in range(m + 1):
        top = m - j
        for i in range(top + 1):
            alphas = []
            for a in _multi_indices(field.ndim, i, axes=xs_axes):
                b = list(a)
                b[0] = j
                alphas.append(tuple(b))
            n = slice_norms(field, alphas)
            total += starred_sup(field, n) if i == top else float(np.max(n))
    return total


def m_star_norm(field: GridField, k: int) -> float:
    """Sum of h_star_norm and w_star_norm of order k."""
    return h_star_norm(field, k) + w_star_norm(field, k)


def c0_norm(field: GridField) -> float:
    return float(np.max(np.abs(field.values)))
