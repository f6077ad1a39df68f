"""Extension across the entrance and x1-mollification of grid fields.

Three extensions of u from [0, L] to (-L/2, L) are provided:

* odd (R):      R u(x1) = -u(-x1) for x1 < 0;
* matched (S):  S u(x1) = sum_j c_j u(-x1 / 2^j), with c solving the
  moment system sum_j (-2^-j)^k c_j = 1, k = 0..4, so S u is C^4 at 0;
* blended (E):  E u = xi R u + (1 - xi) S u with xi a smooth cross-section
  weight equal to 1 within 3/4 of the collar width of the wall and 0
  beyond 4/5 of it.

An ``even`` mirror is included for completeness. Grid data are lifted to
a continuous function of x1 by a quintic interpolating spline, which is
exact on polynomials of degree <= 5.

`mollify_and_glue` convolves the blended extension in x1 with a scaled
exponential bump, shifts it by 2 tau near the exit and glues the two
pieces with a smooth cut-off, so the result needs no data beyond x1 = L.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import make_interp_spline

from ._fd import fornberg_weights
from .errors import CompatibilityError, ConfigError, ShapeError
from .weighted_norms import GridField

MODES = ("odd", "even", "matched", "blended")
NODES = tuple(-(0.5 ** j) for j in range(5))


@dataclass(frozen=True)
class ExtensionCoefficients:
    """Coefficients c_0..c_4 of the matched extension."""

    c: np.ndarray

    def moments(self) -> np.ndarray:
        """sum_j (-2^-j)^k c_j for k = 0..4 (all should equal 1)."""
        V = np.vander(np.asarray(NODES), 5, increasing=True).T
        return V @ self.c

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.moments() - 1.0)))


@lru_cache(maxsize=1)
def _coeffs() -> tuple:
    V = np.vander(np.asarray(NODES), 5, increasing=True).T  # V[k, j] = node_j^k
    return tuple(np.linalg.solve(V, np.ones(5)))  # LU with partial pivoting


def vandermonde_coeffs() -> ExtensionCoefficients:
    return ExtensionCoefficients(np.array(_coeffs()))


# ----------------------------------------------------------- smooth pieces

def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, monotone in between."""
    t = np.asarray(t, dtype=float)
    a, b = _psi(t), _psi(1.0 - t)
    return a / (a + b)


def bump(t):
    """Unnormalized bump exp(-1/(1 - t^2)) supported in (-1, 1)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=8)
def _mollifier_rule(n: int) -> tuple:
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x - x[::-1])  # exact symmetry kills odd moments
    w = 0.5 * (w + w[::-1])
    w = w * bump(x)
    w /= w.sum()
    return x, w


def mollifier_rule(n: int = 64):
    """Quadrature nodes on (-1, 1) and weights of unit mass for the bump."""
    x, w = _mollifier_rule(int(n))
    return x.copy(), w.copy()


# --------------------------------------------------------------- geometry

def wall_distance(field: GridField) -> np.ndarray:
    """Distance of each cross-section sample to the wall."""
    if field.cross_section == "axisym":
        return field.width - field.axis_grid(1)
    y2, y3 = np.meshgrid(field.axis_grid(1), field.axis_grid(2), indexing="ij")
    return np.minimum.reduce([y2, field.width - y2, y3, field.width - y3])


def collar_weight(field: GridField, eps_bar: float) -> np.ndarray:
    """xi: 1 where dist <= 3 eps/4, 0 where dist >= 4 eps/5."""
    if not 0.0 < eps_bar < field.width:
        raise ConfigError("collar width must lie in (0, width)")
    d = wall_distance(field)
    lo, hi = 0.75 * eps_bar, 0.8 * eps_bar
    return 1.0 - smooth_step((d - lo) / (hi - lo))


def cutoff(x1, L: float):
    """zeta: 1 for x1 < L/2, 0 for x1 > 2L/3, nonincreasing."""
    return 1.0 - smooth_step((np.asarray(x1, dtype=float) - 0.5 * L) / (L / 6.0))


# ------------------------------------------------------------- extensions

def _spline(u: GridField):
    return make_interp_spline(u.x1, u.values, k=5, axis=0)


def collar_defect(u: GridField, eps_bar: float) -> dict:
    """max |u| and max |d_1^2 u| over the entrance collar (dist <= eps_bar)."""
    spl = _spline(u)
    mask = wall_distance(u) <= eps_bar + 1e-14
    v0 = np.abs(spl(0.0))[mask]
    v2 = np.abs(spl.derivative(2)(0.0))[mask]
    return {"value": float(v0.max(initial=0.0)), "d11": float(v2.max(initial=0.0))}


def check_collar(u: GridField, eps_bar: float, tol: float = 1e-8) -> dict:
    """Raise CompatibilityError unless u = d_1^2 u = 0 on the entrance collar.

    Tolerances are relative to max|u| and max|u| / L^2.
    """
    d = collar_defect(u, eps_bar)
    scale = max(float(np.max(np.abs(u.values))), np.finfo(float).tiny)
    if d["value"] > tol * scale or d["d11"] > tol * scale / u.L ** 2:
        raise CompatibilityError("collar compatibility violated at the entrance", **d)
    return d


def extend_callable(g, L: float, mode: str = "matched", xi=None):
    """Extension of a callable g on [0, L] to [-L/2, L].

    g maps an array of n points in [0, L] to shape (n, ...). `xi` is the
    cross-section blend weight, required for ``blended``.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown extension mode {mode!r}")
    if mode == "blended" and xi is None:
        raise ConfigError("blended mode needs the collar weight xi")
    c = vandermonde_coeffs().c

    def ev(x1):
        x = np.atleast_1d(np.asarray(x1, dtype=float))
        if np.any(x < -0.5 * L - 1e-12) or np.any(x > L + 1e-12):
            raise ConfigError("evaluation point outside (-L/2, L)")
        right = x >= 0.0
        gr = np.asarray(g(x[right]))
        out = np.empty((x.size,) + gr.shape[1:], dtype=gr.dtype)
        out[right] = gr
        xl = -x[~right]
        if xl.size:
            mirror = np.asarray(g(xl))
            if mode == "odd":
                out[~right] = -mirror
            elif mode == "even":
                out[~right] = mirror
            else:
                # difference form uses sum_j c_j = 1 and avoids cancellation
                s = mirror + sum(c[j] * (np.asarray(g(xl * 0.5 ** j)) - mirror)
                                 for j in range(1, 5))
                out[~right] = s if mode == "matched" else xi * -mirror + (1.0 - xi) * s
        return out

    return ev


def extension_function(u: GridField, mode: str = "blended", eps_bar: float | None = None,
                       check: bool = True, tol: float = 1e-8):
    """Callable x1 -> extended samples of a grid field, valid for -L/2 <= x1 <= L.

    The field is lifted by a quintic spline in x1; the returned function
    maps an array of n points to shape (n, *cross).
    """
    if mode not in MODES:
        raise ConfigError(f"unknown extension mode {mode!r}")
    if mode in ("odd", "blended"):
        if eps_bar is None:
            raise ConfigError(f"mode {mode!r} needs a collar width")
        if check:
            check_collar(u, eps_bar, tol)
    xi = collar_weight(u, eps_bar) if mode == "blended" else None
    return extend_callable(_spline(u), u.L, mode, xi)


def one_sided_jumps(f, h: float, npts: int = 5, k_max: int = 4) -> np.ndarray:
    """Jumps of d^k f at x1 = 0 from one-sided stencils, k = 0..k_max.

    Row k of the result holds right-minus-left derivative estimates for
    every cross-section sample. Both sides use the mirrored node set
    {0, h, ..., (npts - 1) h}.
    """
    off = h * np.arange(npts)
    W = fornberg_weights(0.0, off, k_max)
    Wl = fornberg_weights(0.0, -off, k_max)
    right, left = f(off), f(-off)
    return np.tensordot(W, right, axes=1) - np.tensordot(Wl, left, axes=1)


def spline_jumps(u: GridField, mode: str = "matched", eps_bar: float | None = None,
                 k_max: int = 4, check: bool = True) -> np.ndarray:
    """Exact one-sided derivative jumps of the spline-lifted extension at 0."""
    spl = _spline(u)
    d = np.array([spl.derivative(k)(0.0) if k else spl(0.0) for k in range(k_max + 1)])
    if mode == "even":
        fac = np.array([(-1.0) ** k for k in range(k_max + 1)])
    elif mode == "odd":
        fac = np.array([-(-1.0) ** k for k in range(k_max + 1)])
    elif mode == "matched":
        fac = vandermonde_coeffs().moments()[: k_max + 1]
    else:
        raise ConfigError("spline_jumps supports odd, even and matched")
    fac = fac.reshape((-1,) + (1,) * (d.ndim - 1))
    return d - fac * d


@dataclass
class ExtendedField:
    """Extended samples on a uniform grid over [x1[0], L] with x1[0] <= 0."""

    x1: np.ndarray
    values: np.ndarray
    cross_section: str
    width: float

    @property
    def n_left(self) -> int:
        """Index of x1 = 0."""
        return int(np.argmin(np.abs(self.x1)))


def extend(u: GridField, mode: str = "blended", eps_bar: float | None = None,
           check: bool = True, tol: float = 1e-8) -> ExtendedField:
    """Extend grid samples onto (-L/2, L] with the same x1 spacing.

    Parameters
    ----------
    u : GridField
    mode : {"odd", "even", "matched", "blended"}
    eps_bar : float, optional
        Collar width, required for ``odd`` and ``blended``.
    check : bool
        Enforce the entrance collar conditions u = d_1^2 u = 0.
    """
    f = extension_function(u, mode, eps_bar, check, tol)
    h = u.spacing[0]
    m = int(np.floor(0.5 * u.L / h + 1e-9))
    x_left = -h * np.arange(m, 0, -1)
    vals = np.concatenate([f(x_left), u.values], axis=0)
    return ExtendedField(np.concatenate([x_left, u.x1]), vals, u.cross_section, u.width)


# ------------------------------------------------------------ mollification

def max_tau(L: float) -> float:
    return 0.1 * min(1.0, 0.5 * L)


def mollify(f, x1, tau: float, n_nodes: int = 64) -> np.ndarray:
    """(f * chi_tau)(x1) by symmetric Gauss quadrature; f maps (n,) -> (n, ...)."""
    y, w = mollifier_rule(n_nodes)
    x1 = np.asarray(x1, dtype=float)
    pts = (x1[:, None] - tau * y[None, :]).ravel()
    vals = f(pts).reshape((x1.size, y.size) + f(pts[:1]).shape[1:])
    return np.tensordot(w, np.moveaxis(vals, 1, 0), axes=1)


def mollify_and_glue(u: GridField, tau: float, mode: str = "blended",
                     eps_bar: float | None = None, n_nodes: int = 64,
                     check: bool = True) -> GridField:
    """Partially smooth global approximation u_tau on the grid of u.

    u_tau = zeta u1 + (1 - zeta) u2 with u1 = (E u) * chi_tau and
    u2(x1) = u1(x1 - 2 tau). zeta switches from 1 to 0 on [L/2, 2L/3].

    Raises
    ------
    ConfigError
        If tau is not in (0, min(1, L/2)/10).
    """
    if not 0.0 < tau < max_tau(u.L):
        raise ConfigError("tau must lie in (0, min(1, L/2)/10)", tau=tau, bound=max_tau(u.L))
    f = extension_function(u, mode, eps_bar, check)
    x = u.x1
    z = cutoff(x, u.L)
    out = np.empty_like(u.values)
    zs = z.reshape((-1,) + (1,) * (u.values.ndim - 1))
    near = z > 0.0
    far = z < 1.0
    u1 = mollify(f, x[near], tau, n_nodes)
    u2 = mollify(f, x[far] - 2.0 * tau, tau, n_nodes)
    out[near] = zs[near] * u1
    out[~near] = 0.0
    out[far] += (1.0 - zs[far]) * u2
    if out.shape != u.values.shape:
        raise ShapeError("internal shape mismatch")
    return GridField(out, u.L, u.cross_section, u.width)
