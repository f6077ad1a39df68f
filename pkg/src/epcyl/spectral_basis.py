"""Neumann-Laplacian eigenpairs of the cylinder cross-section.

Two cross-sections are supported:

* ``"disk"``: the unit disk, axisymmetric modes eta_k = c_k J0(lambda_k r)
  with lambda_k the zeros of J1 (lambda_0 = 0).
* ``"rectangle"``: the unit square, eta_mn = c cos(m pi x2) cos(n pi x3).

Disk quadrature nodes are stored as points (r, 0) of a local Cartesian
frame, so derivatives are d2 = eta', d3 = 0, d22 = eta'', d33 = eta'/r,
d23 = 0. This lets one 3x3 coefficient formula serve both shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import j0, j1, jn_zeros, roots_legendre

from .errors import ConfigError, ShapeError

SHAPES = ("disk", "rectangle")


@dataclass
class SpectralBasis:
    """Eigenpairs sampled on a cross-section quadrature rule.

    Attributes
    ----------
    shape : str
    n_modes : int
    omega : ndarray, shape (K,)
        Eigenvalues of -Laplacian, nondecreasing, omega[0] = 0.
    x2, x3 : ndarray, shape (nq,)
        Quadrature nodes (for the disk x2 = r and x3 = 0).
    weights : ndarray, shape (nq,)
        Quadrature weights including the 2 pi r factor for the disk.
    eta, d2, d3, d22, d33, d23 : ndarray, shape (K, nq)
        Modes and their derivatives at the nodes.
    labels : list
        lambda_k for the disk, (m, n) pairs for the rectangle.
    """

    shape: str
    n_modes: int
    omega: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    weights: np.ndarray
    eta: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d22: np.ndarray
    d33: np.ndarray
    d23: np.ndarray
    labels: list = field(default_factory=list)

    @property
    def nq(self) -> int:
        return self.weights.size

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def modes_at(self, x2, x3=None):
        """Modes and derivatives at arbitrary points.

        For the disk `x2` holds radii (x3 is ignored). Returns a dict with
        keys eta, d2, d3, d22, d33, d23 of shape (K, npts). For the disk
        ``d2`` is eta' and ``d33`` is eta'/r (finite limit at r = 0).
        """
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        if self.shape == "disk":
            return _disk_modes(np.asarray(self.labels), x2)
        if x3 is None:
            raise ShapeError("rectangle modes need both coordinates")
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        return _rect_modes(self.labels, x2, x3)

    def dump_table(self) -> dict:
        """Mode table (index, label, omega) for debugging output."""
        return {"index": list(range(self.n_modes)),
                "label": [str(lab) for lab in self.labels],
                "omega": self.omega.tolist()}


def _disk_modes(lam, r):
    lam = np.asarray(lam, dtype=float)
    K = lam.size
    c = np.empty(K)
    c[0] = 1.0 / np.sqrt(np.pi)
    c[1:] = 1.0 / (np.sqrt(np.pi) * np.abs(j0(lam[1:])))
    z = np.outer(lam, r)
    J0z, J1z = j0(z), j1(z)
    eta = c[:, None] * J0z
    d1 = -(c * lam)[:, None] * J1z
    # J1(z)/z with its limit 1/2 at z = 0
    with np.errstate(invalid="ignore", divide="ignore"):
        j1z = np.where(np.abs(z) > 1e-8, J1z / np.where(z == 0, 1.0, z), 0.5 - z ** 2 / 16.0)
    d33 = -(c * lam ** 2)[:, None] * j1z
    d22 = -(c * lam ** 2)[:, None] * (J0z - j1z)
    zero = np.zeros_like(eta)
    return {"eta": eta, "d2": d1, "d3": zero, "d22": d22, "d33": d33, "d23": zero.copy()}


def _rect_pairs(K):
    M = int(np.ceil(np.sqrt(K))) + 2
    pairs = [(m, n) for m in range(M + 1) for n in range(M + 1)]
    pairs.sort(key=lambda mn: (mn[0] ** 2 + mn[1] ** 2, mn[0], mn[1]))
    return pairs[:K]


def _rect_modes(pairs, x2, x3):
    m = np.array([p[0] for p in pairs], dtype=float)[:, None]
    n = np.array([p[1] for p in pairs], dtype=float)[:, None]
    c = np.where(m == 0, 1.0, np.sqrt(2.0)) * np.where(n == 0, 1.0, np.sqrt(2.0))
    a, b = np.pi * m, np.pi * n
    cx, sx = np.cos(a * x2), np.sin(a * x2)
    cy, sy = np.cos(b * x3), np.sin(b * x3)
    return {"eta": c * cx * cy,
            "d2": -c * a * sx * cy,
            "d3": -c * b * cx * sy,
            "d22": -c * a ** 2 * cx * cy,
            "d33": -c * b ** 2 * cx * cy,
            "d23": c * a * b * sx * sy}


def build(shape: str, n_modes: int, quad_order: int | None = None) -> SpectralBasis:
    """Build the first `n_modes` Neumann eigenpairs of the cross-section.

    Parameters
    ----------
    shape : {"disk", "rectangle"}
    n_modes : int
        Number of modes, >= 1.
    quad_order : int, optional
        Gauss-Legendre points (per direction for the rectangle). The
        default resolves products of the retained modes.
    """
    if shape not in SHAPES:
        raise ConfigError(f"unsupported cross-section {shape!r}; expected one of {SHAPES}")
    if n_modes < 1:
        raise ConfigError("n_modes must be at least 1")
    if shape == "disk":
        lam = np.concatenate([[0.0], jn_zeros(1, n_modes - 1)]) if n_modes > 1 else np.zeros(1)
        nq = quad_order or max(2 * n_modes, int(np.pi * n_modes) + 40)
        if nq < 2 * n_modes:
            raise ConfigError("quad_order must be at least 2*n_modes")
        t, w = roots_legendre(nq)
        r = 0.5 * (t + 1.0)
        weights = 2.0 * np.pi * r * 0.5 * w
        md = _disk_modes(lam, r)
        return SpectralBasis(shape, n_modes, lam ** 2, r, np.zeros_like(r), weights,
                             md["eta"], md["d2"], md["d3"], md["d22"], md["d33"], md["d23"],
                             labels=list(lam))
    pairs = _rect_pairs(n_modes)
    mmax = max(max(p) for p in pairs)
    nq1 = quad_order or (2 * mmax + 16)
    if nq1 < 2 * mmax + 2:
        raise ConfigError("quad_order too small for the requested modes")
    t, w = roots_legendre(nq1)
    s = 0.5 * (t + 1.0)
    X2, X3 = np.meshgrid(s, s, indexing="ij")
    W = np.outer(0.5 * w, 0.5 * w)
    x2, x3, weights = X2.ravel(), X3.ravel(), W.ravel()
    md = _rect_modes(pairs, x2, x3)
    omega = np.array([np.pi ** 2 * (m * m + n * n) for m, n in pairs])
    return SpectralBasis(shape, n_modes, omega, x2, x3, weights,
                         md["eta"], md["d2"], md["d3"], md["d22"], md["d33"], md["d23"],
                         labels=pairs)


def project(basis: SpectralBasis, values) -> np.ndarray:
    """Coefficients <f, eta_k> of samples on the quadrature nodes.

    `values` has shape (..., nq); the result has shape (..., K).
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != basis.nq:
        raise ShapeError(f"expected {basis.nq} samples on the last axis, got {values.shape[-1]}")
    return values @ (basis.eta * basis.weights).T


def synthesize(basis: SpectralBasis, coeffs, which: str = "eta") -> np.ndarray:
    """Sum_k c_k eta_k (or a derivative) on the quadrature nodes."""
    coeffs = np.asarray(coeffs, dtype=float)
    K = coeffs.shape[-1]
    if K > basis.n_modes:
        raise ShapeError("more coefficients than modes")
    return coeffs @ getattr(basis, which)[:K]


def galerkin_matrices(basis: SpectralBasis, a_field):
    """Projected principal coefficients.

    Parameters
    ----------
    a_field : ndarray, shape (..., 3, 3, nq)
        Coefficients a_ij on the quadrature nodes (indices 0, 1, 2 stand
        for x1, x2, x3).

    Returns
    -------
    alpha, beta : ndarray, shape (..., K, K)
        alpha[k, l] = 2 sum_{j=2,3} <a_1j d_j eta_l, eta_k>,
        beta[k, l]  = sum_{i,j=2,3} <a_ij d_ij eta_l, eta_k>.
    """
    a = np.asarray(a_field, dtype=float)
    if a.shape[-3:] != (3, 3, basis.nq):
        raise ShapeError(f"a_field must end with (3, 3, {basis.nq})")
    ew = basis.eta * basis.weights
    alpha = 2.0 * (np.einsum("...q,lq,kq->...kl", a[..., 0, 1, :], basis.d2, ew, optimize=True)
                   + np.einsum("...q,lq,kq->...kl", a[..., 0, 2, :], basis.d3, ew, optimize=True))
    beta = (np.einsum("...q,lq,kq->...kl", a[..., 1, 1, :], basis.d22, ew, optimize=True)
            + np.einsum("...q,lq,kq->...kl", a[..., 2, 2, :], basis.d33, ew, optimize=True)
            + np.einsum("...q,lq,kq->...kl", a[..., 1, 2, :] + a[..., 2, 1, :], basis.d23, ew,
                        optimize=True))
    return alpha, beta
