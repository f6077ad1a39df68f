"""Galerkin/Picard solver for small potential-flow perturbations.

The unknowns are the perturbations (psi, Psi) = (phi, Phi) - (phi_bar, Phi_bar)
of the velocity and electric potentials. Given an iterate P, the
coefficients a_ij(P) and the nonlinear remainders f1(P), f2(P) are frozen
and the linear system

    sum a_ij d_ij V + a1 d_1 V + b1 d_1 W + b2 W = f1^P
    Lap W - h1 W - h2 d_1 V = f2^P

is reduced to ODEs in x1 by expanding in Neumann eigenfunctions of the
cross-section. The hyperbolic modes are marched by RK4 and the elliptic
modes solved as Neumann two-point problems (Numerov, fourth order),
alternating until the sweep converges. Picard iterations repeat the
linear solve until the M^3_* norm of the update drops below tolerance.

Cross-section fields live on the basis quadrature nodes; for the disk a
node (r, 0) carries local Cartesian components (x1, r, theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.sparse.linalg import splu

from . import _fd
from .background import BackgroundSolution, GasParams, integrate_background
from .boundary_data import BoundaryData
from .errors import (ConfigError, HyperbolicityLossError, NonContractionError,
                     OutOfRegimeError, VacuumError, WeakCouplingError)
from .spectral_basis import SpectralBasis, galerkin_matrices, project
from .weighted_norms import GridField, m_star_norm

BAND = (0.5, 2.0)


# ------------------------------------------------------------------ background

@dataclass
class BackgroundGrid:
    """Background profiles and linearized coefficients on the solver x1 grid."""

    params: GasParams
    x: np.ndarray
    rho: np.ndarray
    E: np.ndarray
    u: np.ndarray
    Phi: np.ndarray
    solution: BackgroundSolution

    @property
    def L(self) -> float:
        return float(self.x[-1])

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def c2(self) -> np.ndarray:
        p = self.params
        return p.gamma * p.S0 * self.rho ** (p.gamma - 1.0)

    @property
    def mach2(self) -> np.ndarray:
        return self.u ** 2 / self.c2

    def coefficients(self) -> dict:
        return background_coefficients(self.params, self.rho, self.E, self.u)


def background_grid(params: GasParams, L: float, nx1: int, min_steps: int = 4096,
                    background: BackgroundSolution | None = None) -> BackgroundGrid:
    """Background sampled on nx1 + 1 uniform points, integrated on a finer grid."""
    if nx1 < 16:
        raise ConfigError("nx1 must be at least 16")
    r = max(1, math.ceil(min_steps / nx1))
    bg = background
    if bg is None or bg.x1.size - 1 != nx1 * r or not np.isclose(bg.L, L, rtol=0, atol=1e-14):
        bg = integrate_background(params, L, nx1 * r)
    sl = slice(None, None, r)
    return BackgroundGrid(params, bg.x1[sl].copy(), bg.rho[sl].copy(), bg.E[sl].copy(),
                          bg.u[sl].copy(), bg.Phi[sl].copy(), bg)


def background_coefficients(params: GasParams, rho, E, u) -> dict:
    """Coefficients a1, b1, b2, h1, h2 of the linearization about the background.

    With c^2 = gamma S0 rho^(gamma-1) and D = c^2 - u^2 < 0:
    a1 = E (gamma u^2 + c^2)/D^2, b1 = u/D, b2 = -(gamma-1) E u/D^2,
    h1 = rho^(2-gamma)/(gamma S0), h2 = -u h1.
    """
    g, S0 = params.gamma, params.S0
    rho, E, u = (np.asarray(a, dtype=float) for a in (rho, E, u))
    c2 = g * S0 * rho ** (g - 1.0)
    D = c2 - u ** 2
    h1 = rho ** (2.0 - g) / (g * S0)
    return {"abar1": E * (g * u ** 2 + c2) / D ** 2,
            "bbar1": u / D,
            "bbar2": -(g - 1.0) * E * u / D ** 2,
            "hbar1": h1,
            "hbar2": -u * h1}


# ----------------------------------------------------------- pointwise physics

def density(params: GasParams, Phi_tot, U, S=None):
    """rho = [((gamma-1)/(gamma S)) (Phi - |U|^2/2)]^(1/(gamma-1)).

    `U` has its components on the leading axis. Raises VacuumError where
    Phi - |U|^2/2 <= 0.
    """
    g = params.gamma
    S = params.S0 if S is None else S
    ent = np.asarray(Phi_tot) - 0.5 * np.sum(np.asarray(U) ** 2, axis=0)
    if np.any(ent <= 0.0):
        idx = np.unravel_index(int(np.argmin(ent)), ent.shape)
        raise VacuumError("Phi - |u|^2/2 <= 0 (cavitation)", index=tuple(int(i) for i in idx),
                          value=float(ent[idx]))
    return ((g - 1.0) / (g * S) * ent) ** (1.0 / (g - 1.0))


@dataclass
class SwirlSources:
    """Vortical and entropy contributions seen by the potential solve.

    All arrays are sampled on (x1 grid, quadrature nodes) in the local
    frame (x1, r, theta) of a disk node (r, 0).

    Attributes
    ----------
    q : ndarray (3, n1, nq)
        Velocity part curl(phi_theta e_theta) + (Lambda/r) e_theta.
    Dq : ndarray (3, 3, n1, nq)
        Jacobian Dq[i, j] = d_j q_i in local Cartesian components.
    S : ndarray (n1, nq)
    gradS : ndarray (3, n1, nq)
    psi_en : ndarray (nq,)
        Entrance value of psi.
    """

    q: np.ndarray
    Dq: np.ndarray
    S: np.ndarray
    gradS: np.ndarray
    psi_en: np.ndarray


@dataclass
class PotentialProblem:
    """Everything the linear and Picard solves need, sampled once."""

    params: GasParams
    bg: BackgroundGrid
    boundary: BoundaryData
    basis: SpectralBasis
    coef: dict
    b_dev: np.ndarray          # (n1, nq) b - b0
    Een: np.ndarray            # (K,) modal E_en
    Eex: np.ndarray            # (K,) modal E_ex - E_bar(L)
    g1: np.ndarray             # (nq,) entrance d_1 psi
    psi_en: np.ndarray         # (nq,)
    swirl: SwirlSources | None = None

    @property
    def K(self) -> int:
        return self.basis.n_modes

    @property
    def x(self) -> np.ndarray:
        return self.bg.x

    def w_bd(self):
        """Modal boundary lift (value, d1, d11) of shape (n1, K)."""
        x, L = self.x[:, None], self.bg.L
        w = (x - x ** 2 / (2 * L)) * self.Een + x ** 2 / (2 * L) * self.Eex
        dw = (1 - x / L) * self.Een + x / L * self.Eex
        ddw = np.broadcast_to((self.Eex - self.Een) / L, w.shape)
        return w, dw, np.array(ddw)


def build_problem(params: GasParams, L: float, nx1: int, boundary: BoundaryData,
                  basis: SpectralBasis, background: BackgroundSolution | None = None,
                  swirl: SwirlSources | None = None, bg: BackgroundGrid | None = None
                  ) -> PotentialProblem:
    """Sample background, boundary data and lifts for a potential solve."""
    if boundary.shape != basis.shape:
        raise ConfigError("boundary data and basis use different cross-sections")
    if bg is None:
        bg = background_grid(params, L, nx1, background=background)
    if swirl is None and not boundary.is_trivial(("v_en", "w_en", "S_en")):
        raise ConfigError("potential flow takes no v_en, w_en or S_en perturbation")
    s = boundary.coord(basis.x2, basis.x3)
    b_dev = boundary.b_value(bg.x[:, None], s[None, :], bg.L) - params.b0
    Een = project(basis, boundary.value("E_en", s))
    Eex = project(basis, boundary.value("E_ex", s) - bg.E[-1])
    g1 = boundary.value("u_en", s) - params.u0
    psi_en = np.zeros_like(s)
    if swirl is not None:
        g1 = g1 - swirl.q[0, 0]
        psi_en = swirl.psi_en
    return PotentialProblem(params, bg, boundary, basis, bg.coefficients(), b_dev,
                            Een, Eex, g1, psi_en, swirl)


# ------------------------------------------------------------------ the state

@dataclass
class PerturbationState:
    """Modal perturbation (psi, Psi) on the x1 grid.

    theta, dtheta : (n1, K) modal psi and d_1 psi.
    Theta, dTheta : (n1, K) modal Psi (= W + w_bd) and d_1 Psi.
    """

    x1: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    Theta: np.ndarray
    dTheta: np.ndarray
    iteration: int = 0
    history: list = field(default_factory=list)
    converged: bool = False
    sigma: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def zero(cls, x1, K):
        z = np.zeros((x1.size, K))
        return cls(x1, z, z.copy(), z.copy(), z.copy())

    def __sub__(self, other: "PerturbationState") -> "PerturbationState":
        return PerturbationState(self.x1, self.theta - other.theta, self.dtheta - other.dtheta,
                                 self.Theta - other.Theta, self.dTheta - other.dTheta)

    def blend(self, other: "PerturbationState", lam: float) -> "PerturbationState":
        """self + lam (other - self)."""
        f = lambda a, b: a + lam * (b - a)  # noqa: E731
        return PerturbationState(self.x1, f(self.theta, other.theta),
                                 f(self.dtheta, other.dtheta), f(self.Theta, other.Theta),
                                 f(self.dTheta, other.dTheta))

    def sup(self) -> float:
        return float(max(np.max(np.abs(a)) for a in
                         (self.theta, self.dtheta, self.Theta, self.dTheta)))

    def nodal(self, basis: SpectralBasis) -> dict:
        """psi, Psi and their gradients on (x1 grid, nodes); gradients are (3, n1, nq)."""
        h = self.x1[1] - self.x1[0]
        t, dt, T, dT = self.theta, self.dtheta, self.Theta, self.dTheta
        psi = t @ basis.eta
        Psi = T @ basis.eta
        q = np.stack([dt @ basis.eta, t @ basis.d2, t @ basis.d3])
        p = np.stack([dT @ basis.eta, T @ basis.d2, T @ basis.d3])
        ddt = _fd.derivative(dt, h, axis=0)
        ddT = _fd.derivative(dT, h, axis=0)
        hess = np.empty((3, 3) + psi.shape)
        hess[0, 0] = ddt @ basis.eta
        hess[0, 1] = hess[1, 0] = dt @ basis.d2
        hess[0, 2] = hess[2, 0] = dt @ basis.d3
        hess[1, 1] = t @ basis.d22
        hess[2, 2] = t @ basis.d33
        hess[1, 2] = hess[2, 1] = t @ basis.d23
        lapPsi = (ddT - T * basis.omega) @ basis.eta
        return {"psi": psi, "Psi": Psi, "q": q, "p": p, "hess": hess, "lapPsi": lapPsi}

    def grid_fields(self, basis: SpectralBasis, n_cross: int | None = None):
        """(psi, Psi) as GridFields on a uniform cross-section grid."""
        K = basis.n_modes
        if basis.shape == "disk":
            n = n_cross or max(33, 8 * K + 1)
            r = np.linspace(0.0, 1.0, n)
            eta = basis.modes_at(r)["eta"]
            return (GridField(self.theta @ eta, self.x1[-1], "axisym"),
                    GridField(self.Theta @ eta, self.x1[-1], "axisym"))
        mmax = max(max(lab) for lab in basis.labels)
        n = n_cross or max(17, 6 * mmax + 1)
        s = np.linspace(0.0, 1.0, n)
        X2, X3 = np.meshgrid(s, s, indexing="ij")
        eta = basis.modes_at(X2.ravel(), X3.ravel())["eta"]
        shp = (self.x1.size, n, n)
        return (GridField((self.theta @ eta).reshape(shp), self.x1[-1], "square"),
                GridField((self.Theta @ eta).reshape(shp), self.x1[-1], "square"))

    def mstar(self, basis: SpectralBasis, k: int = 3, n_cross: int | None = None) -> float:
        """||psi||_{M^k_*} + ||Psi||_{M^k_*}."""
        f, F = self.grid_fields(basis, n_cross)
        return m_star_norm(f, k) + m_star_norm(F, k)


# ---------------------------------------------------- linearized coefficients

@dataclass
class LinearizedCoefficients:
    """Frozen coefficients of one Picard step.

    a : (3, 3, n1, nq) principal coefficients
    abar1..hbar2 : (n1,) background profiles
    f1, f2 : (n1, nq) nonlinear remainders
    f1P, f2P : (n1, K) projected sources including the boundary lift
    alpha, beta : (n1, K, K) projected principal parts
    w_bd, dw_bd : (n1, K) modal lift and its x1 derivative
    theta0, dtheta0 : (K,) entrance data of V
    residual : (2, n1, nq) PDE residual of the iterate the coefficients were built from
    band : (min, max) of -eig(a_[23]) (M^2 - 1)
    """

    a: np.ndarray
    abar1: np.ndarray
    bbar1: np.ndarray
    bbar2: np.ndarray
    hbar1: np.ndarray
    hbar2: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f1P: np.ndarray
    f2P: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    w_bd: np.ndarray
    dw_bd: np.ndarray
    theta0: np.ndarray
    dtheta0: np.ndarray
    residual: np.ndarray
    band: tuple
    omega: np.ndarray
    h: float


def pointwise_terms(problem: PotentialProblem, z, p, q):
    """a_ij, B - B_bar, rho - rho_bar and c^2 - U_1^2 at every sample.

    Parameters
    ----------
    z : (n1, nq) Psi
    p : (3, n1, nq) grad Psi
    q : (3, n1, nq) grad psi
    """
    prm, bg = problem.params, problem.bg
    g = prm.gamma
    Phib = bg.Phi[:, None]
    ub = bg.u[:, None]
    Eb = bg.E[:, None]
    sw = problem.swirl
    U = q.copy()
    U[0] += ub
    if sw is not None:
        U += sw.q
        S, gradS = sw.S, sw.gradS
    else:
        S, gradS = None, None
    ent = Phib + z - 0.5 * np.sum(U ** 2, axis=0)
    if np.any(ent <= 0.0):
        idx = np.unravel_index(int(np.argmin(ent)), ent.shape)
        raise VacuumError("Phi - |u|^2/2 <= 0 (cavitation)", x1=float(bg.x[idx[0]]),
                          node=int(idx[1]))
    c2 = (g - 1.0) * ent
    den = c2 - U[0] ** 2
    if np.any(den >= 0.0):
        idx = np.unravel_index(int(np.argmax(den)), den.shape)
        raise HyperbolicityLossError("c^2 - u_1^2 >= 0: flow no longer supersonic in x1",
                                     x1=float(bg.x[idx[0]]), node=int(idx[1]))
    a = (c2 * np.eye(3)[:, :, None, None] - U[:, None] * U[None, :]) / den
    gradPhi = p.copy()
    gradPhi[0] += Eb
    num = np.sum(U * gradPhi, axis=0)
    if sw is not None:
        num = num - np.einsum("i...,ij...,j...->...", U, sw.Dq, U)
        num = num - c2 * np.sum(U * gradS, axis=0) / ((g - 1.0) * S)
    B = num / den
    # same formulas at the zero state so that the background cancels exactly
    c2b = (g - 1.0) * (Phib - 0.5 * ub ** 2)
    Bb = Eb * ub / (c2b - ub ** 2)
    rho = density(prm, Phib + z, U, S)
    rhob = density(prm, Phib, np.stack([ub, 0 * ub, 0 * ub]))
    return {"a": a, "dB": B - Bb, "drho": rho - rhob, "den": den, "c2": c2, "U": U, "rho": rho}


def band_margins(problem: PotentialProblem, a) -> tuple:
    """Extreme values of -eig([a_ij]_{i,j>=2}) (M^2 - 1) over all samples."""
    a22, a33, a23 = a[1, 1], a[2, 2], 0.5 * (a[1, 2] + a[2, 1])
    tr, det = a22 + a33, a22 * a33 - a23 ** 2
    disc = np.sqrt(np.maximum(0.25 * tr ** 2 - det, 0.0))
    lam_lo, lam_hi = -(0.5 * tr + disc), -(0.5 * tr - disc)
    scale = (problem.bg.mach2 - 1.0)[:, None]
    return float(np.min(lam_hi * scale)), float(np.max(lam_lo * scale))


def linearized_coefficients(state: PerturbationState, problem: PotentialProblem,
                            check_band: bool = True) -> LinearizedCoefficients:
    """Freeze a_ij, f1, f2 at `state` and project everything onto the basis.

    Raises
    ------
    HyperbolicityLossError, VacuumError
        Degenerate iterate.
    OutOfRegimeError
        Band of -[a_ij]_{i,j>=2} violated at some sample.
    """
    basis, coef, bg = problem.basis, problem.coef, problem.bg
    nod = state.nodal(basis)
    z, p, q = nod["Psi"], nod["p"], nod["q"]
    t = pointwise_terms(problem, z, p, q)
    band = band_margins(problem, t["a"])
    if check_band and (band[0] < BAND[0] or band[1] > BAND[1]):
        raise OutOfRegimeError("principal coefficients left the hyperbolicity band",
                               band=band)
    col = {k: v[:, None] for k, v in coef.items()}
    f1 = -t["dB"] + col["abar1"] * q[0] + col["bbar1"] * p[0] + col["bbar2"] * z
    f2 = t["drho"] - problem.b_dev - col["hbar1"] * z - col["hbar2"] * q[0]
    # residuals of the nonlinear equations at this iterate
    res1 = np.einsum("ij...,ij...->...", t["a"], nod["hess"]) + t["dB"]
    res2 = nod["lapPsi"] - t["drho"] + problem.b_dev
    w, dw, ddw = problem.w_bd()
    f1P = project(basis, f1) - coef["bbar1"][:, None] * dw - coef["bbar2"][:, None] * w
    f2P = project(basis, f2) - ddw + (basis.omega + coef["hbar1"][:, None]) * w
    alpha, beta = galerkin_matrices(basis, np.moveaxis(t["a"], (0, 1), (1, 2)))
    return LinearizedCoefficients(
        t["a"], coef["abar1"], coef["bbar1"], coef["bbar2"], coef["hbar1"], coef["hbar2"],
        f1, f2, f1P, f2P, alpha, beta, w, dw,
        project(basis, problem.psi_en), project(basis, problem.g1),
        np.stack([res1, res2]), band, basis.omega, bg.h)


# ------------------------------------------------------------- linear solver

_D1_LEFT = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def _elliptic_operator(omega, hbar1, h):
    """Block-diagonal Numerov operator for Theta'' - (omega + h1) Theta with Neumann ends."""
    K, n = omega.size, hbar1.size
    rows, cols, vals = [], [], []
    for k in range(K):
        off = k * n
        c = omega[k] + hbar1
        for j, wj in enumerate(_D1_LEFT):
            rows += [off, off + n - 1]
            cols += [off + j, off + n - 1 - j]
            vals += [wj, -wj]
        i = np.arange(1, n - 1)
        for s, wt in ((-1, 1.0), (0, 10.0), (1, 1.0)):
            base = 1.0 if s else -2.0
            rows.append(off + i)
            cols.append(off + i + s)
            vals.append(base - h * h * wt * c[i + s] / 12.0)
    rows = np.concatenate([np.atleast_1d(np.asarray(r)) for r in rows])
    cols = np.concatenate([np.atleast_1d(np.asarray(c)) for c in cols])
    vals = np.concatenate([np.atleast_1d(np.asarray(v, dtype=float)) for v in vals])
    A = sp.csc_matrix((vals, (rows, cols)), shape=(K * n, K * n))
    return splu(A)


def _elliptic_rhs(R, h):
    n = R.shape[0]
    out = np.zeros_like(R)
    out[1:n - 1] = h * h / 12.0 * (R[:-2] + 10.0 * R[1:-1] + R[2:])
    return out


def _march(theta0, dtheta0, A, B, G, Am, Bm, Gm, h):
    """RK4 for theta'' = G - A theta' - B theta with per-step coefficient samples."""
    n, K = G.shape
    th = np.empty((n, K))
    dth = np.empty((n, K))
    y, v = theta0.astype(float).copy(), dtheta0.astype(float).copy()
    th[0], dth[0] = y, v

    def acc(Ai, Bi, Gi, yy, vv):
        return Gi - Ai @ vv - Bi @ yy

    for i in range(n - 1):
        k1y, k1v = v, acc(A[i], B[i], G[i], y, v)
        y2, v2 = y + 0.5 * h * k1y, v + 0.5 * h * k1v
        k2y, k2v = v2, acc(Am[i], Bm[i], Gm[i], y2, v2)
        y3, v3 = y + 0.5 * h * k2y, v + 0.5 * h * k2v
        k3y, k3v = v3, acc(Am[i], Bm[i], Gm[i], y3, v3)
        y4, v4 = y + h * k3y, v + h * k3v
        k4y, k4v = v4, acc(A[i + 1], B[i + 1], G[i + 1], y4, v4)
        y = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        th[i + 1], dth[i + 1] = y, v
    return th, dth


@dataclass
class LinearSolution:
    theta: np.ndarray
    dtheta: np.ndarray
    W: np.ndarray
    dW: np.ndarray
    sweeps: int


def solve_linear_bvp(lc: LinearizedCoefficients, n_modes: int | None = None,
                     inner_tol: float = 1e-10, max_sweeps: int = 200,
                     W0: np.ndarray | None = None) -> LinearSolution:
    """Solve the Galerkin system for (V, W) by alternating sweeps.

    Hyperbolic part, marched by RK4 from theta(0), theta'(0):
        theta'' + (a1 + alpha) theta' + beta theta = f1P - b1 W' - b2 W
    Elliptic part with W'(0) = W'(L) = 0:
        W'' - (omega + h1) W = f2P + h2 theta'

    Parameters
    ----------
    lc : LinearizedCoefficients
    n_modes : int, optional
        Use only the leading modes (default: all).
    inner_tol : float
        Sweep stops when the coefficient sup-change is below
        inner_tol * (1 + sup of the iterate).
    max_sweeps : int

    Raises
    ------
    WeakCouplingError
        Sweeps do not contract.
    """
    K = lc.f1P.shape[1] if n_modes is None else int(n_modes)
    h = lc.h
    n = lc.f1P.shape[0]
    om = lc.omega[:K]
    A = lc.abar1[:, None, None] * np.eye(K) + lc.alpha[:, :K, :K]
    B = lc.beta[:, :K, :K]
    Am, Bm = _fd.midpoints(A), _fd.midpoints(B)
    f1P, f2P = lc.f1P[:, :K], lc.f2P[:, :K]
    lu = _elliptic_operator(om, lc.hbar1, h)
    W = np.zeros((n, K)) if W0 is None else W0[:, :K].copy()
    dW = _fd.derivative(W, h, axis=0)
    dW[0] = dW[-1] = 0.0
    th = dth = None
    last = np.inf
    grow = 0
    for sweep in range(1, max_sweeps + 1):
        G = f1P - lc.bbar1[:, None] * dW - lc.bbar2[:, None] * W
        th_new, dth_new = _march(lc.theta0[:K], lc.dtheta0[:K], A, B, G, Am, Bm,
                                 _fd.midpoints(G), h)
        R = f2P + lc.hbar2[:, None] * dth_new
        W_new = lu.solve(_elliptic_rhs(R, h).T.ravel()).reshape(K, n).T
        dW_new = _fd.derivative(W_new, h, axis=0)
        dW_new[0] = dW_new[-1] = 0.0
        change = float(np.max(np.abs(W_new - W)))
        if th is not None:
            change = max(change, float(np.max(np.abs(th_new - th))))
        scale = 1.0 + max(float(np.max(np.abs(th_new))), float(np.max(np.abs(W_new))))
        th, dth, W, dW = th_new, dth_new, W_new, dW_new
        if not np.isfinite(change):
            raise WeakCouplingError("hyperbolic/elliptic sweep produced non-finite values",
                                    sweep=sweep)
        if change <= inner_tol * scale:
            return LinearSolution(th, dth, W, dW, sweep)
        grow = grow + 1 if change > last else 0
        last = change
        if grow >= 3:
            break
    raise WeakCouplingError("hyperbolic/elliptic sweeps failed to contract",
                            sweeps=sweep, change=change)


# --------------------------------------------------------------------- Picard

@dataclass
class PicardOptions:
    tol: float = 1e-8
    max_iters: int = 50
    damping: float = 1.0
    inner_tol: float = 1e-10
    max_sweeps: int = 200
    norm_order: int = 3
    sigma_max: float | None = None
    check_band: bool = True

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise ConfigError("damping must lie in (0, 1]")
        if self.tol <= 0 or self.inner_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.max_iters < 1 or self.max_sweeps < 1:
            raise ConfigError("iteration limits must be positive")


def residual_l2(problem: PotentialProblem, residual) -> float:
    """L2 norm over the cylinder of the two nodal PDE residuals."""
    dens = np.sum(residual ** 2, axis=0) @ problem.basis.weights
    return float(np.sqrt(max(simpson(dens, x=problem.x), 0.0)))


def state_from_solution(sol: LinearSolution, lc: LinearizedCoefficients, x1) -> PerturbationState:
    return PerturbationState(x1, sol.theta, sol.dtheta, sol.W + lc.w_bd, sol.dW + lc.dw_bd)


def picard_solve(problem: PotentialProblem, opts: PicardOptions | None = None,
                 initial: PerturbationState | None = None, sigma: float | None = None
                 ) -> PerturbationState:
    """Fixed-point iteration P -> I(P) from P_0 = 0 (or `initial`).

    Each step freezes coefficients at the current iterate and solves the
    linear Galerkin system. Convergence is declared when the M^k_* norm
    of the update falls below ``opts.tol``.

    Raises
    ------
    OutOfRegimeError
        sigma above ``opts.sigma_max``, or the band check fails.
    NonContractionError
        Update norm grew for three consecutive iterations, or max_iters
        reached.
    """
    opts = opts or PicardOptions()
    sig = 0.0 if sigma is None else float(sigma)
    if opts.sigma_max is not None and sig > opts.sigma_max:
        raise OutOfRegimeError("sigma above the configured guard", sigma=sig,
                               sigma_max=opts.sigma_max)
    basis = problem.basis
    state = initial or PerturbationState.zero(problem.x, problem.K)
    lc = linearized_coefficients(state, problem, opts.check_band)
    history = []
    last = np.inf
    grow = 0
    W0 = None
    for it in range(1, opts.max_iters + 1):
        sol = solve_linear_bvp(lc, inner_tol=opts.inner_tol, max_sweeps=opts.max_sweeps, W0=W0)
        W0 = sol.W
        new = state_from_solution(sol, lc, problem.x)
        if opts.damping < 1.0:
            new = state.blend(new, opts.damping)
        upd = (new - state).mstar(basis, opts.norm_order)
        state = new
        lc = linearized_coefficients(state, problem, opts.check_band)
        history.append({"iter": it, "update_norm": upd,
                        "residual_l2": residual_l2(problem, lc.residual), "sigma": sig})
        if upd <= opts.tol:
            state.converged = True
            break
        grow = grow + 1 if upd > last else 0
        last = upd
        if grow >= 3:
            raise NonContractionError("Picard iteration diverges", sigma=sig, L=problem.bg.L,
                                      history=history)
    else:
        raise NonContractionError("Picard iteration hit max_iters", sigma=sig,
                                  L=problem.bg.L, history=history)
    state.iteration = len(history)
    state.history = history
    state.sigma = sig
    state.diagnostics = {"band": lc.band, "residual_l2": history[-1]["residual_l2"],
                         "sweeps": sol.sweeps}
    return state


# ------------------------------------------------------------ reconstruction

def primitive_fields(state: PerturbationState, problem: PotentialProblem) -> dict:
    """rho, velocity components, Phi and Mach on (x1 grid, nodes)."""
    nod = state.nodal(problem.basis)
    t = pointwise_terms(problem, nod["Psi"], nod["p"], nod["q"])
    U, c2 = t["U"], t["c2"]
    return {"rho": t["rho"], "u": U, "Phi": problem.bg.Phi[:, None] + nod["Psi"],
            "mach": np.sqrt(np.sum(U ** 2, axis=0) / c2), "den": t["den"]}


def collar_report(state: PerturbationState, problem: PotentialProblem) -> dict:
    """Entrance traces of the converged state on the collar and on the whole entrance."""
    basis, bd = problem.basis, problem.boundary
    h = problem.bg.h
    s = bd.coord(basis.x2, basis.x3)
    if basis.shape == "disk":
        collar = s >= 1.0 - bd.eps_bar
    else:
        dist = np.minimum.reduce([basis.x2, 1 - basis.x2, basis.x3, 1 - basis.x3])
        collar = dist <= bd.eps_bar
    psi0 = state.theta[0] @ basis.eta
    ddth = _fd.derivative(state.dtheta, h, axis=0)
    psi11 = ddth[0] @ basis.eta
    dPsi0 = state.dTheta[0] @ basis.eta
    dPsiL = state.dTheta[-1] @ basis.eta
    En = project(basis, bd.value("E_en", s)) @ basis.eta
    Ex = project(basis, bd.value("E_ex", s) - problem.bg.E[-1]) @ basis.eta
    out = {"psi_entrance": float(np.max(np.abs(psi0 - (project(basis, problem.psi_en)
                                                        @ basis.eta)))),
           "dPsi_entrance": float(np.max(np.abs(dPsi0 - En))),
           "dPsi_exit": float(np.max(np.abs(dPsiL - Ex)))}
    if np.any(collar):
        out["psi_collar"] = float(np.max(np.abs(psi0[collar])))
        out["d11psi_collar"] = float(np.max(np.abs(psi11[collar])))
        out["dPsi_collar"] = float(np.max(np.abs(dPsi0[collar])))
    return out


def potential_residuals(state: PerturbationState, problem: PotentialProblem,
                        n_cross: int | None = None) -> dict:
    """Finite-difference residuals of div(rho grad phi) and Lap Phi - rho + b.

    Fields are synthesized on the solver x1 grid and a uniform
    cross-section grid, then differentiated with fourth-order stencils.
    Returns max-norms over interior samples (axis and wall rows kept).
    """
    basis, bg, prm = problem.basis, problem.bg, problem.params
    if basis.shape != "disk":
        return _potential_residuals_square(state, problem, n_cross)
    n = n_cross or max(33, 8 * basis.n_modes + 1)
    r = np.linspace(0.0, 1.0, n)
    hr, h1 = r[1] - r[0], bg.h
    eta = basis.modes_at(r)["eta"]
    psi = state.theta @ eta
    Psi = state.Theta @ eta
    ux = bg.u[:, None] + state.dtheta @ eta
    ur = _fd.derivative(psi, hr, axis=1, left="even")
    Phi = bg.Phi[:, None] + Psi
    rho = density(prm, Phi, np.stack([ux, ur]))
    mx, mr = rho * ux, rho * ur
    mass = _fd.derivative(mx, h1, axis=0) + _axis_div(mr, r, hr)
    # d11 Phi_bar = d1 E_bar: the O(1) background is never differenced twice
    lap = (_fd.derivative(bg.E, h1)[:, None] + _fd.derivative(Psi, h1, axis=0, order=2)
           + _fd.derivative(Psi, hr, axis=1, order=2, left="even")
           + _axis_grad_over_r(Psi, r, hr))
    b = bg.params.b0 + problem.boundary.profile("b").shape(r)[None, :] * \
        problem.boundary.b_axial.shape(bg.x / bg.L)[:, None]
    b = b + (problem.boundary.base("b") - prm.b0)
    pois = lap - rho + b
    return {"mass": float(np.max(np.abs(mass))), "poisson": float(np.max(np.abs(pois))),
            "h": max(h1, hr)}


def _axis_div(fr, r, hr):
    """(1/r) d_r (r f) for an odd-in-r field, with 2 d_r f at the axis."""
    d = _fd.derivative(fr, hr, axis=1, left="odd")
    out = d.copy()
    out[:, 1:] += fr[:, 1:] / r[1:]
    out[:, 0] = 2.0 * d[:, 0]
    return out


def _axis_grad_over_r(f, r, hr):
    """(1/r) d_r f for an even-in-r field, with d_rr f at the axis."""
    d = _fd.derivative(f, hr, axis=1, left="even")
    out = np.empty_like(d)
    out[:, 1:] = d[:, 1:] / r[1:]
    out[:, 0] = _fd.derivative(f, hr, axis=1, order=2, left="even")[:, 0]
    return out


def _potential_residuals_square(state, problem, n_cross):
    basis, bg, prm = problem.basis, problem.bg, problem.params
    mmax = max(max(lab) for lab in basis.labels)
    n = n_cross or max(17, 6 * mmax + 1)
    s = np.linspace(0.0, 1.0, n)
    hs, h1 = s[1] - s[0], bg.h
    X2, X3 = np.meshgrid(s, s, indexing="ij")
    md = basis.modes_at(X2.ravel(), X3.ravel())
    shp = (bg.x.size, n, n)
    syn = lambda c, w: (c @ md[w]).reshape(shp)  # noqa: E731
    u1 = bg.u[:, None, None] + syn(state.dtheta, "eta")
    u2, u3 = syn(state.theta, "d2"), syn(state.theta, "d3")
    Phi = bg.Phi[:, None, None] + syn(state.Theta, "eta")
    rho = density(prm, Phi, np.stack([u1, u2, u3]))
    mass = (_fd.derivative(rho * u1, h1, axis=0) + _fd.derivative(rho * u2, hs, axis=1)
            + _fd.derivative(rho * u3, hs, axis=2))
    Psi = syn(state.Theta, "eta")
    lap = _fd.derivative(bg.E, h1)[:, None, None] + sum(
        _fd.derivative(Psi, hh, axis=ax, order=2) for ax, hh in ((0, h1), (1, hs), (2, hs)))
    sc = problem.boundary.coord(X2, X3)
    b = problem.boundary.b_value(bg.x[:, None, None], sc[None], bg.L)
    pois = lap - rho + b
    return {"mass": float(np.max(np.abs(mass))), "poisson": float(np.max(np.abs(pois))),
            "h": max(h1, hs)}


def solve_potential(params: GasParams, L: float, nx1: int, boundary: BoundaryData,
                    basis: SpectralBasis, opts: PicardOptions | None = None,
                    sigma: float | None = None, background: BackgroundSolution | None = None):
    """Convenience wrapper: build the problem and run the Picard iteration."""
    problem = build_problem(params, L, nx1, boundary, basis, background=background)
    return picard_solve(problem, opts, sigma=sigma), problem
