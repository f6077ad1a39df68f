"""Axisymmetric Euler-Poisson flows with swirl on the unit-disk cylinder.

The velocity is split as

    u = grad(phi) + curl(phi_theta e_theta) + (Lambda / r) e_theta,

with potential phi, meridional stream-type function phi_theta and angular
momentum density Lambda = r u_theta. The outer iteration maps (S, Lambda,
phi_theta) to a new triple:

1. solve the potential problem for (phi, Phi) with the vortical velocity
   and the entropy gradient as frozen sources;
2. build the momentum density m = rho u and the stream function
   w = int_0^r t m_x dt;
3. pull every point back to its entrance radius T = G^{-1}(w) with
   G = w(0, .) and set S = S_en(T), Lambda = T w_en(T);
4. solve the swirl Poisson problem for phi_theta.

All fields live on a uniform (x1, r) grid; the potential solve uses the
disk Galerkin basis on the same x1 grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline, RegularGridInterpolator
from scipy.sparse.linalg import splu

from . import _fd
from .background import BackgroundSolution, GasParams
from .boundary_data import BoundaryData
from .errors import (ConfigError, DegenerateFluxError, NonContractionError, OutOfRegimeError,
                     SolverError)
from .potential_solver import (BackgroundGrid, PerturbationState, PicardOptions, SwirlSources,
                               background_grid, build_problem, density, picard_solve)
from .spectral_basis import SpectralBasis
from .weighted_norms import GridField, m_star_norm

FLUX_BAND = (0.4, 1.6)
RADIUS_BAND = (0.5, 2.0)


@dataclass(frozen=True)
class AxisymGrid:
    """Uniform (x1, r) grid on [0, L] x [0, 1]."""

    L: float
    nx1: int
    nr: int

    def __post_init__(self):
        if self.nx1 < 16 or self.nr < 16:
            raise ConfigError("axisymmetric grids need at least 16 intervals per direction")
        if self.L <= 0:
            raise ConfigError("L must be positive")

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.nx1 + 1)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nr + 1)

    @property
    def h1(self) -> float:
        return self.L / self.nx1

    @property
    def hr(self) -> float:
        return 1.0 / self.nr

    @property
    def shape(self) -> tuple:
        return (self.nx1 + 1, self.nr + 1)

    def field(self, values) -> GridField:
        return GridField(values, self.L, "axisym")


# ------------------------------------------------------------- axis helpers

def d1(grid: AxisymGrid, f, order: int = 1):
    return _fd.derivative(f, grid.h1, axis=0, order=order)


def dr(grid: AxisymGrid, f, parity: str, order: int = 1):
    """Radial derivative of a field with the given parity across r = 0."""
    return _fd.derivative(f, grid.hr, axis=1, order=order, left=parity)


def over_r(grid: AxisymGrid, f, axis_value):
    """f / r with the prescribed value on the axis."""
    out = np.empty_like(f)
    out[:, 1:] = f[:, 1:] / grid.r[1:]
    out[:, 0] = axis_value
    return out


def to_nodes(grid: AxisymGrid, f, r_nodes, parity: str):
    """Cubic-spline interpolation in r with the field mirrored across the axis."""
    s = 1.0 if parity == "even" else -1.0
    r = grid.r
    rr = np.concatenate([-r[:0:-1], r])
    ff = np.concatenate([s * f[:, :0:-1], f], axis=1)
    return CubicSpline(rr, ff, axis=1)(r_nodes)


# -------------------------------------------------------------- kinematics

def swirl_velocity(grid: AxisymGrid, phi_theta, Lambda) -> dict:
    """Vortical velocity q = curl(phi_theta e_theta) + (Lambda/r) e_theta and its derivatives.

    Returns cylindrical components qx, qr, qt with first derivatives and
    the ratios qt/r, qr/r; axis values come from the parity expansions
    phi_theta ~ r and Lambda ~ r^2.
    """
    # one-sided at the axis: exact on polynomials whatever their parity
    dphr = _fd.derivative(phi_theta, grid.hr, axis=1)
    qx = dphr + over_r(grid, phi_theta, dphr[:, 0])
    qr = -d1(grid, phi_theta)
    qt = over_r(grid, Lambda, 0.0)
    Lrr0 = dr(grid, Lambda, "even", order=2)[:, 0]
    return {
        "qx": qx, "qr": qr, "qt": qt,
        "qx_1": d1(grid, qx), "qx_r": dr(grid, qx, "even"),
        "qr_1": d1(grid, qr), "qr_r": dr(grid, qr, "odd"),
        "qt_1": d1(grid, qt), "qt_r": dr(grid, qt, "odd"),
        "qt_over_r": _lambda_over_r2(grid, Lambda, Lrr0),
        "qr_over_r": over_r(grid, qr, dr(grid, qr, "odd")[:, 0]),
    }


def _lambda_over_r2(grid, Lambda, Lrr0):
    out = np.empty_like(Lambda)
    out[:, 1:] = Lambda[:, 1:] / grid.r[1:] ** 2
    out[:, 0] = 0.5 * Lrr0
    return out


def velocity_from_decomposition(grid: AxisymGrid, phi, phi_theta, Lambda):
    """(u_x, u_r, u_theta) from the Helmholtz decomposition fields.

    u_x = d_1 phi + d_r phi_theta + phi_theta / r,
    u_r = d_r phi - d_1 phi_theta,
    u_theta = Lambda / r,
    with the axis values of phi_theta / r and Lambda / r taken from
    d_r phi_theta(x1, 0) and 0.
    """
    q = swirl_velocity(grid, phi_theta, Lambda)
    return (d1(grid, phi) + q["qx"], dr(grid, phi, "even") + q["qr"], q["qt"])


def density_and_momentum(params: GasParams, S, Phi, u):
    """rho = ((gamma-1)/(gamma S))^(1/(gamma-1)) (Phi - |u|^2/2)^(1/(gamma-1)) and m = rho u.

    `u` is a sequence of velocity components. Raises VacuumError on
    cavitation.
    """
    U = np.stack([np.asarray(c, dtype=float) for c in u])
    rho = density(params, Phi, U, S)
    return rho, rho * U


def stream_function(grid: AxisymGrid, m_x, J0: float, check_band: bool = True):
    """w(x1, r) = int_0^r t m_x(x1, t) dt per x1 slice (cubic-exact quadrature).

    Raises OutOfRegimeError if m_x leaves [2/5 J0, 8/5 J0].
    """
    m_x = np.asarray(m_x, dtype=float)
    lo, hi = float(m_x.min()), float(m_x.max())
    if check_band and (lo < FLUX_BAND[0] * J0 or hi > FLUX_BAND[1] * J0):
        raise OutOfRegimeError("axial momentum density left the band [2/5 J0, 8/5 J0]",
                               min=lo / J0, max=hi / J0)
    return _fd.cumulative_integral(grid.r * m_x, grid.hr, axis=-1)


def flux_function(r, m_en):
    """G(r) = int_0^r t m_en(t) dt as a monotone Hermite spline with linear extension."""
    r = np.asarray(r, dtype=float)
    G = _fd.cumulative_integral(r * m_en, r[1] - r[0])
    dG = r * m_en
    if np.any(np.diff(G) <= 0.0) or np.any(dG[1:] <= 0.0):
        raise DegenerateFluxError("entrance flux function is not strictly increasing")
    return CubicHermiteSpline(r, G, dG)


def transport_map(w, G: CubicHermiteSpline, r=None, check_band: bool = True,
                  tol: float = 1e-12):
    """T = G^{-1}(w) pointwise by bisection on [0, 1] and a Newton polish.

    Values of w beyond G(1) use the linear extension of G. If `r` is
    given, the ratio r/T is asserted to lie in [1/2, 2] for r > 0.
    """
    w = np.asarray(w, dtype=float)
    G1 = float(G(1.0))
    dG1 = float(G(1.0, 1))
    lo = np.zeros_like(w)
    hi = np.ones_like(w)
    inside = w <= G1
    for _ in range(55):
        mid = 0.5 * (lo + hi)
        below = G(mid) < w
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    T = 0.5 * (lo + hi)
    for _ in range(2):
        gp = G(T, 1)
        step = np.where(gp > 0, (G(T) - w) / np.where(gp > 0, gp, 1.0), 0.0)
        T = np.clip(T - step, 0.0, 1.0)
    T = np.where(inside, T, 1.0 + (w - G1) / dG1)
    T = np.where(w <= 0.0, 0.0, T)
    err = np.abs(np.where(inside, G(np.clip(T, 0, 1)) - w, 0.0))
    if np.max(err, initial=0.0) > tol * max(1.0, abs(G1)):
        raise DegenerateFluxError("flux inversion did not converge", residual=float(err.max()))
    if check_band and r is not None:
        rr = np.broadcast_to(r, T.shape)
        pos = rr > 0
        ratio = rr[pos] / T[pos]
        if ratio.size and (ratio.min() < RADIUS_BAND[0] or ratio.max() > RADIUS_BAND[1]):
            raise OutOfRegimeError("radius distortion r/T left [1/2, 2]",
                                   min=float(ratio.min()), max=float(ratio.max()))
    return T


def solve_transport(T, boundary: BoundaryData):
    """S = S_en(T) and Lambda = T w_en(T)."""
    T = np.asarray(T, dtype=float)
    return boundary.value("S_en", T), T * boundary.value("w_en", T)


# ------------------------------------------------------------ swirl Poisson

def _row_weights(order, j, n, left_parity, right_kind):
    """Stencil (columns, weights) of a 4th-order derivative at row j of n+1 points."""
    half = (order + 1) // 2 + 1
    offs = list(range(-half, half + 1))
    if left_parity is None and j - half < 0:
        offs = list(range(-j, -j + 2 * half + 1 + (order > 1)))
    if right_kind == "onesided" and j + half > n:
        top = n - j
        offs = list(range(top - 2 * half - (order > 1), top + 1))
    w = _fd.fornberg_weights(0.0, np.array(offs, dtype=float), order)[order]
    cols, vals = [], []
    for o, wt in zip(offs, w):
        k = j + o
        s = 1.0
        if k < 0:
            k, s = -k, (-1.0 if left_parity == "odd" else 1.0)
        cols.append(k)
        vals.append(s * wt)
    return cols, vals


def _matrix(order, n, h, left_parity=None):
    M = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        cols, vals = _row_weights(order, j, n, left_parity, "onesided")
        for c, v in zip(cols, vals):
            M[j, c] += v
    return M / h ** order


class SwirlPoisson:
    """Factored fourth-order operator of -(d11 + d_rr + d_r/r - 1/r^2) phi = g.

    Boundary conditions: phi = 0 at r = 0 and r = 1, d_1 phi = 0 at both
    x1 ends. Unknowns are the interior radii on every x1 row.
    """

    def __init__(self, grid: AxisymGrid):
        self.grid = grid
        n1, nr = grid.nx1, grid.nr
        r = grid.r
        D2x = _matrix(2, n1, grid.h1)
        D1x = _matrix(1, n1, grid.h1)
        Mx = D2x.copy()
        Mx[0], Mx[-1] = D1x[0], D1x[-1]
        P = np.eye(n1 + 1)
        P[0, 0] = P[-1, -1] = 0.0
        D2r = _matrix(2, nr, grid.hr, left_parity="odd")
        D1r = _matrix(1, nr, grid.hr, left_parity="odd")
        inner = slice(1, nr)
        Lr = (D2r + np.diag(1.0 / np.where(r > 0, r, 1.0)) @ D1r
              - np.diag(1.0 / np.where(r > 0, r, 1.0) ** 2))[inner, inner]
        A = sp.kron(sp.csr_matrix(Mx), sp.identity(nr - 1)) + sp.kron(sp.csr_matrix(P),
                                                                        sp.csr_matrix(Lr))
        self.A = A.tocsc()
        self.lu = splu(self.A)
        self.bc_rows = np.zeros(n1 + 1, dtype=bool)
        self.bc_rows[[0, -1]] = True

    def solve(self, g, rtol: float = 1e-10):
        g = np.asarray(g, dtype=float)
        rhs = -g[:, 1:-1].copy()
        rhs[self.bc_rows] = 0.0
        b = rhs.ravel()
        x = self.lu.solve(b)
        res = np.linalg.norm(self.A @ x - b)
        scale = max(np.linalg.norm(b), 1e-300)
        if np.linalg.norm(b) > 0 and res > rtol * scale:
            x = x + self.lu.solve(b - self.A @ x)  # one refinement step
            res = np.linalg.norm(self.A @ x - b)
            if res > rtol * scale:
                raise SolverError("swirl Poisson solve missed its residual target",
                                  relative_residual=float(res / scale))
        out = np.zeros_like(g)
        out[:, 1:-1] = x.reshape(self.grid.nx1 + 1, self.grid.nr - 1)
        return out


def solve_swirl_poisson(g, grid: AxisymGrid):
    """phi_theta solving -(d11 + (1/r) d_r(r d_r) - 1/r^2) phi_theta = g."""
    return SwirlPoisson(grid).solve(g)


def swirl_source(params: GasParams, grid: AxisymGrid, rho, u_x, S, Lambda):
    """g = [rho^(gamma-1) d_r S / (gamma-1) + (Lambda/r^2) d_r Lambda] / u_x."""
    dS = dr(grid, S, "even")
    dL = dr(grid, Lambda, "even")
    Lrr0 = dr(grid, Lambda, "even", order=2)[:, 0]
    g = (rho ** (params.gamma - 1.0) * dS / (params.gamma - 1.0)
         + _lambda_over_r2(grid, Lambda, Lrr0) * dL) / u_x
    g[:, 0] = 0.0
    return g


# ------------------------------------------------------------------- states

@dataclass
class AxisymState:
    """Decomposition fields on the (x1, r) grid."""

    grid: AxisymGrid
    psi: np.ndarray          # phi - phi_bar
    Psi: np.ndarray          # Phi - Phi_bar
    phi_theta: np.ndarray
    S: np.ndarray
    Lambda: np.ndarray
    potential: PerturbationState | None = None

    def deviation_norm(self, S0: float, k: int = 3) -> float:
        """Sum of M^k_* norms of psi, Psi, phi_theta, S - S0 and Lambda."""
        g = self.grid
        return float(sum(m_star_norm(g.field(f), k) for f in
                         (self.psi, self.Psi, self.phi_theta, self.S - S0, self.Lambda)))

    def difference_norm(self, other: "AxisymState", k: int = 3) -> float:
        g = self.grid
        return float(sum(m_star_norm(g.field(a - b), k) for a, b in
                         ((self.psi, other.psi), (self.Psi, other.Psi),
                          (self.phi_theta, other.phi_theta), (self.S, other.S),
                          (self.Lambda, other.Lambda))))


@dataclass
class FlowState:
    """Primitive fields on the (x1, r) grid."""

    grid: AxisymGrid
    rho: np.ndarray
    u_x: np.ndarray
    u_r: np.ndarray
    u_theta: np.ndarray
    p: np.ndarray
    Phi: np.ndarray
    S: np.ndarray
    Lambda: np.ndarray
    mach: np.ndarray
    b: np.ndarray
    Psi: np.ndarray | None = None      # Phi - Phi_bar, kept apart to spare second differences
    E_bar: np.ndarray | None = None    # background field on the x1 grid
    diagnostics: dict = field(default_factory=dict)

    def columns(self) -> dict:
        X1, R = np.meshgrid(self.grid.x1, self.grid.r, indexing="ij")
        return {"x1": X1.ravel(), "r": R.ravel(), "rho": self.rho.ravel(),
                "u_x": self.u_x.ravel(), "u_r": self.u_r.ravel(),
                "u_theta": self.u_theta.ravel(), "p": self.p.ravel(), "Phi": self.Phi.ravel(),
                "S": self.S.ravel(), "Lambda": self.Lambda.ravel(), "mach": self.mach.ravel()}

    def lower_bounds(self) -> dict:
        """min of rho, u_x and Mach - 1 over the grid."""
        return {"rho": float(self.rho.min()), "u_x": float(self.u_x.min()),
                "mach_minus_1": float(self.mach.min() - 1.0)}

    def azimuthal_slices(self, angles=(0.0, 1.0)) -> list:
        """Cartesian velocity on two azimuthal half-planes (rotated back to angle 0)."""
        out = []
        for a in angles:
            c, s = np.cos(a), np.sin(a)
            uy = self.u_r * c - self.u_theta * s
            uz = self.u_r * s + self.u_theta * c
            out.append(np.stack([self.rho, self.u_x, c * uy + s * uz, -s * uy + c * uz]))
        return out


@dataclass
class AxisymOptions:
    outer_tol: float = 1e-10
    max_outer: int = 40
    picard: PicardOptions = field(default_factory=lambda: PicardOptions(tol=1e-11,
                                                                        inner_tol=1e-12))
    check_bands: bool = True
    sigma_max: float | None = None


# --------------------------------------------------------------- the solver

class AxisymSolver:
    """Outer iteration over (S, Lambda, phi_theta)."""

    def __init__(self, params: GasParams, grid: AxisymGrid, boundary: BoundaryData,
                 basis: SpectralBasis, opts: AxisymOptions | None = None,
                 background: BackgroundSolution | None = None):
        if boundary.shape != "disk" or basis.shape != "disk":
            raise ConfigError("the swirl solver needs the disk cross-section")
        self.params, self.grid, self.boundary, self.basis = params, grid, boundary, basis
        self.opts = opts or AxisymOptions()
        self.bg: BackgroundGrid = background_grid(params, grid.L, grid.nx1,
                                                  background=background)
        r, rq = grid.r, basis.x2
        md = basis.modes_at(r)
        self.eta_r, self.deta_r = md["eta"], md["d2"]
        self.poisson = SwirlPoisson(grid)
        self.rq = rq
        # psi at the entrance: -int_r^1 v_en
        rf = np.linspace(0.0, 1.0, 4001)
        cum = cumulative_simpson(boundary.value("v_en", rf), x=rf, initial=0.0)
        tail = CubicSpline(rf, cum[-1] - cum)
        self.psi_en_nodes = -tail(rq)
        self.b = (boundary.b_value(grid.x1[:, None], r[None, :], grid.L))
        self.history: list = []
        self.violations = {"flux": 0, "radius": 0, "band": 0}
        self.extrema = {"flux": [np.inf, -np.inf], "radius": [np.inf, -np.inf],
                        "band": [np.inf, -np.inf]}

    # initial guesses
    def initial(self, kind: str = "entrance"):
        g, bd = self.grid, self.boundary
        n1 = g.shape[0]
        if kind == "entrance":
            S = np.tile(bd.value("S_en", g.r), (n1, 1))
            Lam = np.tile(g.r * bd.value("w_en", g.r), (n1, 1))
        elif kind == "background":
            S = np.full(g.shape, self.params.S0)
            Lam = np.zeros(g.shape)
        else:
            raise ConfigError(f"unknown initial guess {kind!r}")
        return S, Lam, np.zeros(g.shape)

    def sources(self, S, Lam, phth) -> tuple:
        """SwirlSources on (x1 grid, nodes) and the uniform-grid velocity parts."""
        g, rq = self.grid, self.rq
        q = swirl_velocity(g, phth, Lam)
        nodes = lambda f, par: to_nodes(g, f, rq, par)  # noqa: E731
        qx, qr, qt = nodes(q["qx"], "even"), nodes(q["qr"], "odd"), nodes(q["qt"], "odd")
        Dq = np.zeros((3, 3) + qx.shape)
        Dq[0, 0], Dq[0, 1] = nodes(q["qx_1"], "even"), nodes(q["qx_r"], "odd")
        Dq[1, 0], Dq[1, 1] = nodes(q["qr_1"], "odd"), nodes(q["qr_r"], "even")
        Dq[1, 2] = -nodes(q["qt_over_r"], "even")
        Dq[2, 0], Dq[2, 1] = nodes(q["qt_1"], "odd"), nodes(q["qt_r"], "even")
        Dq[2, 2] = nodes(q["qr_over_r"], "even")
        S_n = nodes(S, "even")
        gradS = np.zeros((3,) + S_n.shape)
        gradS[0] = nodes(d1(g, S), "even")
        gradS[1] = nodes(dr(g, S, "even"), "odd")
        sw = SwirlSources(np.stack([qx, qr, qt]), Dq, S_n, gradS, self.psi_en_nodes)
        return sw, q

    def flow(self, pot: PerturbationState, q: dict, S, Lam):
        """Primitive fields on the uniform grid from the modal potentials and q."""
        bg = self.bg
        psi = pot.theta @ self.eta_r
        Psi = pot.Theta @ self.eta_r
        u_x = bg.u[:, None] + pot.dtheta @ self.eta_r + q["qx"]
        u_r = pot.theta @ self.deta_r + q["qr"]
        u_t = q["qt"]
        Phi = bg.Phi[:, None] + Psi
        rho, m = density_and_momentum(self.params, S, Phi, (u_x, u_r, u_t))
        return psi, Psi, Phi, (u_x, u_r, u_t), rho, m

    def _track(self, key, lo, hi, bounds):
        e = self.extrema[key]
        e[0], e[1] = min(e[0], lo), max(e[1], hi)
        if lo < bounds[0] or hi > bounds[1]:
            self.violations[key] += 1

    def step(self, S, Lam, phth, pot0=None):
        """One application of the outer map."""
        prm, g, bd = self.params, self.grid, self.boundary
        sw, q = self.sources(S, Lam, phth)
        problem = build_problem(prm, g.L, g.nx1, bd, self.basis, swirl=sw, bg=self.bg)
        pot = picard_solve(problem, self.opts.picard, initial=pot0)
        band = pot.diagnostics["band"]
        self._track("band", band[0], band[1], (0.5, 2.0))
        psi, Psi, Phi, U, rho, m = self.flow(pot, q, S, Lam)
        self._track("flux", float(m[0].min()) / prm.J0, float(m[0].max()) / prm.J0, FLUX_BAND)
        w = stream_function(g, m[0], prm.J0, self.opts.check_bands)
        # entrance flux from the prescribed data
        r = g.r
        ue, ve, we = bd.value("u_en", r), bd.value("v_en", r), bd.value("w_en", r)
        ent = ((prm.gamma - 1.0) / (prm.gamma * bd.value("S_en", r))
               * (Phi[0] - 0.5 * (ue ** 2 + ve ** 2 + we ** 2)))
        m_en = np.maximum(ent, 0.0) ** (1.0 / (prm.gamma - 1.0)) * ue
        G = flux_function(r, m_en)
        T = transport_map(w, G, r[None, :], self.opts.check_bands)
        ratio = r[None, 1:] / T[:, 1:]
        self._track("radius", float(ratio.min()), float(ratio.max()), RADIUS_BAND)
        S_new, Lam_new = solve_transport(T, bd)
        gsrc = swirl_source(prm, g, rho, U[0], S_new, Lam_new)
        phth_new = self.poisson.solve(gsrc)
        return S_new, Lam_new, phth_new, pot, {"psi": psi, "Psi": Psi, "T": T, "w": w}

    def solve(self, initial: str = "entrance", sigma: float | None = None):
        """Run the outer iteration; returns (AxisymState, FlowState)."""
        o = self.opts
        if o.sigma_max is not None and sigma is not None and sigma > o.sigma_max:
            raise OutOfRegimeError("sigma above the configured guard", sigma=sigma,
                                   sigma_max=o.sigma_max)
        S, Lam, phth = self.initial(initial)
        pot = None
        last = np.inf
        grow = 0
        self.history = []
        for it in range(1, o.max_outer + 1):
            S_n, L_n, ph_n, pot, extra = self.step(S, Lam, phth, pot)
            change = float(max(np.max(np.abs(S_n - S)), np.max(np.abs(L_n - Lam)),
                               np.max(np.abs(ph_n - phth))))
            S, Lam, phth = S_n, L_n, ph_n
            self.history.append({"iter": it, "change": change,
                                 "picard_iters": pot.iteration})
            if change <= o.outer_tol:
                break
            grow = grow + 1 if change > last else 0
            last = change
            if grow >= 3:
                raise NonContractionError("outer iteration diverges", history=self.history)
        else:
            raise NonContractionError("outer iteration hit max_outer", history=self.history)
        # final consistent assembly with the converged triple
        sw, q = self.sources(S, Lam, phth)
        psi, Psi, Phi, U, rho, m = self.flow(pot, q, S, Lam)
        state = AxisymState(self.grid, psi, Psi, phth, S, Lam, pot)
        prm = self.params
        c2 = prm.gamma * S * rho ** (prm.gamma - 1.0)
        speed = np.sqrt(U[0] ** 2 + U[1] ** 2 + U[2] ** 2)
        flow = FlowState(self.grid, rho, U[0], U[1], U[2], S * rho ** prm.gamma, Phi, S, Lam,
                         speed / np.sqrt(c2), self.b, Psi, self.bg.E.copy())
        flow.diagnostics = {"outer_iterations": len(self.history), "history": self.history,
                            "violations": dict(self.violations),
                            "extrema": {k: list(v) for k, v in self.extrema.items()},
                            "T": extra["T"], "w": extra["w"]}
        return state, flow


def solve_full(params: GasParams, grid: AxisymGrid, boundary: BoundaryData,
               basis: SpectralBasis, opts: AxisymOptions | None = None,
               initial: str = "entrance", sigma: float | None = None,
               background: BackgroundSolution | None = None):
    """Solve the swirl problem; returns (AxisymState, FlowState)."""
    return AxisymSolver(params, grid, boundary, basis, opts, background).solve(initial, sigma)


# -------------------------------------------------------------- diagnostics

def _div_r(grid, fr, parity_of_f="odd"):
    """(1/r) d_r (r f) with its axis limit 2 d_r f (f odd)."""
    d = dr(grid, fr, parity_of_f)
    out = d.copy()
    out[:, 1:] += fr[:, 1:] / grid.r[1:]
    out[:, 0] = 2.0 * d[:, 0]
    return out


def residuals(flow: FlowState, params: GasParams) -> dict:
    """Max-norm finite-difference residuals of the converged flow.

    Keys: mass, momentum_x, momentum_r, momentum_theta, poisson, div_m
    (r-weighted divergence of m = rho u), bernoulli (max |B - Phi|).
    Rows with r > 0 only; fourth-order stencils throughout.
    """
    g = flow.grid
    rho, ux, ur, ut, p, Phi = flow.rho, flow.u_x, flow.u_r, flow.u_theta, flow.p, flow.Phi
    r = g.r[None, 1:]
    sl = (slice(None), slice(1, None))
    mx, mr = rho * ux, rho * ur
    mass = d1(g, mx) + _div_r(g, mr)
    mom_x = d1(g, mx * ux) + _div_r(g, mr * ux) + d1(g, p) - rho * d1(g, Phi)
    mom_r = (d1(g, mx * ur) + dr(g, mr * ur, "even"))[sl] + (mr * ur)[sl] / r \
        - (rho * ut ** 2)[sl] / r + dr(g, p, "even")[sl] - (rho * dr(g, Phi, "even"))[sl]
    mom_t = (d1(g, mx * ut) + dr(g, mr * ut, "even"))[sl] + 2.0 * (mr * ut)[sl] / r
    if flow.Psi is not None and flow.E_bar is not None:
        # d11 Phi_bar = d1 E_bar avoids differencing the O(1) background twice
        Pv = flow.Psi
        lap = d1(g, np.broadcast_to(flow.E_bar[:, None], Pv.shape)) + d1(g, Pv, 2)
    else:
        Pv = Phi
        lap = d1(g, Phi, 2)
    lap = lap + dr(g, Pv, "even", 2)
    lap[:, 1:] += dr(g, Pv, "even")[:, 1:] / g.r[1:]
    lap[:, 0] += dr(g, Pv, "even", 2)[:, 0]
    pois = lap - rho + flow.b
    R = g.r[None, :]
    divm = d1(g, R * mx) + dr(g, R * mr, "even")
    B = 0.5 * (ux ** 2 + ur ** 2 + ut ** 2) + params.gamma * flow.S * rho ** (params.gamma - 1) \
        / (params.gamma - 1.0)
    m = lambda a: float(np.max(np.abs(a[sl])))  # noqa: E731
    return {"mass": m(mass), "momentum_x": m(mom_x), "momentum_r": float(np.max(np.abs(mom_r))),
            "momentum_theta": float(np.max(np.abs(mom_t))), "poisson": m(pois),
            "div_m": m(divm), "bernoulli": float(np.max(np.abs(B - Phi))),
            "h": max(g.h1, g.hr)}


def trace_streamlines(flow: FlowState, n_lines: int = 20, steps_per_cell: int = 2,
                      r_range=(0.05, 0.95)):
    """Trace m-streamlines by RK4 from the entrance and sample S and Lambda along them.

    Returns a list of dicts with x1, r, S, Lambda arrays per trajectory
    and the max variation of S and Lambda along each.
    """
    g = flow.grid
    x1, r = g.x1, g.r
    slope = flow.rho * flow.u_r / (flow.rho * flow.u_x)
    f = RegularGridInterpolator((x1, r), slope, method="cubic")
    fS = RegularGridInterpolator((x1, r), flow.S, method="cubic")
    fL = RegularGridInterpolator((x1, r), flow.Lambda, method="cubic")
    n = g.nx1 * steps_per_cell
    h = g.L / n
    r0 = np.linspace(*r_range, n_lines)
    xs = np.linspace(0.0, g.L, n + 1)
    rs = np.empty((n + 1, n_lines))
    rs[0] = r0
    y = r0.copy()
    ev = lambda x, yy: f(np.column_stack([np.full_like(yy, min(x, g.L)),  # noqa: E731
                                          np.clip(yy, 0.0, 1.0)]))
    for i in range(n):
        x = xs[i]
        k1 = ev(x, y)
        k2 = ev(x + h / 2, y + h / 2 * k1)
        k3 = ev(x + h / 2, y + h / 2 * k2)
        k4 = ev(x + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        rs[i + 1] = y
    out = []
    for j in range(n_lines):
        pts = np.column_stack([xs, np.clip(rs[:, j], 0.0, 1.0)])
        Sv, Lv = fS(pts), fL(pts)
        out.append({"x1": xs, "r": rs[:, j], "S": Sv, "Lambda": Lv,
                    "dS": float(Sv.max() - Sv.min()), "dLambda": float(Lv.max() - Lv.min())})
    return out
