"""One-dimensional background flow.

The background is the x1-only solution (rho_bar, E_bar) of

    rho' = E rho / (gamma S0 rho^(gamma-1) - J0^2 / rho^2),
    E'   = rho - b0,

started from (rho0, E0). Velocity is u = J0 / rho and the electric
potential is Phi = B0 + int_0^x1 E with the Bernoulli constant B0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import CubicHermiteSpline

from .errors import NumericalError, ParameterError, SonicBreakdownError


@dataclass(frozen=True)
class GasParams:
    """Fixed constants of the problem.

    Parameters
    ----------
    gamma : float
        Adiabatic exponent, > 1.
    J0 : float
        Momentum density of the background, > 0.
    S0 : float
        Background entropy, > 0.
    b0 : float
        Background ion density, 0 < b0 < rho_s.
    rho0 : float
        Entrance density, 0 < rho0 < rho_s.
    E0 : float
        Entrance electric field. Must be 0.
    """

    gamma: float
    J0: float
    S0: float
    b0: float
    rho0: float
    E0: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "J0", "S0", "b0", "rho0", "E0"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParameterError(f"{name} must be a finite number, got {v!r}")
        if not self.gamma > 1.0:
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")
        if not self.J0 > 0.0:
            raise ParameterError(f"J0 must be positive, got {self.J0}")
        if not self.S0 > 0.0:
            raise ParameterError(f"S0 must be positive, got {self.S0}")
        rs = self.rho_s
        if not 0.0 < self.b0 < rs:
            raise ParameterError(f"b0 must lie in (0, rho_s={rs:.6g}), got {self.b0}")
        if not 0.0 < self.rho0 < rs:
            raise ParameterError(f"rho0 must lie in (0, rho_s={rs:.6g}), got {self.rho0}")
        if self.E0 != 0.0:
            raise ParameterError(f"E0 must be 0, got {self.E0}")

    @property
    def rho_s(self) -> float:
        """Sonic density (J0^2/(gamma S0))^(1/(gamma+1))."""
        return (self.J0 ** 2 / (self.gamma * self.S0)) ** (1.0 / (self.gamma + 1.0))

    @property
    def h0(self) -> float:
        return (self.gamma * self.S0) ** (1.0 / (self.gamma + 1.0))

    @property
    def u_s(self) -> float:
        """Sonic speed J0 / rho_s."""
        return self.J0 / self.rho_s

    @property
    def u0(self) -> float:
        return self.J0 / self.rho0

    @property
    def B0(self) -> float:
        """Bernoulli constant at the entrance."""
        g = self.gamma
        return 0.5 * self.u0 ** 2 + g * self.S0 * self.rho0 ** (g - 1.0) / (g - 1.0)

    @property
    def k0(self) -> float:
        """Phase-plane invariant of the orbit through (rho0, E0)."""
        return phase_invariant(self, self.rho0, self.E0)


def sonic_density(params: GasParams) -> float:
    """Density at which the background is exactly sonic."""
    return params.rho_s


def _H_closed(params: GasParams, rho):
    # antiderivative of ((t-b0)/t)(g S0 t^(g-1) - J0^2/t^2)
    g, S0, J0, b0 = params.gamma, params.S0, params.J0, params.b0

    def F(t):
        return (S0 * t ** g - g * S0 * b0 * t ** (g - 1.0) / (g - 1.0)
                + J0 ** 2 / t - 0.5 * b0 * J0 ** 2 / t ** 2)

    return F(np.asarray(rho, dtype=float)) - F(params.rho_s)


def H_potential(params: GasParams, rho, method: str = "closed"):
    """H(rho) = int_{rho_s}^{rho} ((t-b0)/t)(gamma S0 t^(gamma-1) - J0^2/t^2) dt.

    ``method="closed"`` uses the antiderivative, ``method="quad"`` adaptive
    Gauss-Kronrod quadrature (scalar input only).
    """
    if method == "closed":
        return _H_closed(params, rho)
    if method == "quad":
        g, S0, J0, b0 = params.gamma, params.S0, params.J0, params.b0

        def f(t):
            return (t - b0) / t * (g * S0 * t ** (g - 1.0) - J0 ** 2 / t ** 2)

        val, _ = quad(f, params.rho_s, float(rho), epsabs=1e-14, epsrel=1e-13, limit=200)
        return val
    raise ParameterError(f"unknown method {method!r}")


def phase_invariant(params: GasParams, rho, E, method: str = "closed"):
    """Return E^2/2 - H(rho), constant along background orbits."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0.0):
        raise ParameterError("rho must be positive")
    return 0.5 * np.asarray(E, dtype=float) ** 2 - H_potential(params, rho, method)


def _rhs(params: GasParams, rho: float, E: float):
    g = params.gamma
    den = g * params.S0 * rho ** (g - 1.0) - params.J0 ** 2 / rho ** 2
    if not abs(den) > 0.0:
        raise NumericalError("background denominator vanished (sonic point)", rho=rho)
    return E * rho / den, rho - params.b0


def _rk4_step(params: GasParams, rho: float, E: float, h: float):
    k1 = _rhs(params, rho, E)
    k2 = _rhs(params, rho + 0.5 * h * k1[0], E + 0.5 * h * k1[1])
    k3 = _rhs(params, rho + 0.5 * h * k2[0], E + 0.5 * h * k2[1])
    k4 = _rhs(params, rho + h * k3[0], E + h * k3[1])
    return (rho + h * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0,
            E + h * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0)


def default_delta_bar(params: GasParams) -> float:
    return 0.05 * params.rho_s


@dataclass
class BackgroundSolution:
    """Background profiles on a uniform x1 grid."""

    params: GasParams
    x1: np.ndarray
    rho: np.ndarray
    E: np.ndarray
    u: np.ndarray
    Phi: np.ndarray
    B0: float
    k0: float
    delta_bar: float
    _spline: tuple = field(default=None, repr=False, compare=False)

    @property
    def L(self) -> float:
        return float(self.x1[-1])

    @property
    def c2(self) -> np.ndarray:
        """Squared sound speed gamma S0 rho^(gamma-1)."""
        g = self.params.gamma
        return g * self.params.S0 * self.rho ** (g - 1.0)

    @property
    def mach(self) -> np.ndarray:
        return self.u / np.sqrt(self.c2)

    @property
    def delta_hat(self) -> float:
        """Measured supersonic margin min(Mach) - 1."""
        return float(self.mach.min() - 1.0)

    @property
    def rho_prime(self) -> np.ndarray:
        return self.E * self.rho / (self.c2 - self.u ** 2)

    @property
    def invariant(self) -> np.ndarray:
        return phase_invariant(self.params, self.rho, self.E)

    def invariant_drift(self) -> float:
        return float(np.max(np.abs(self.invariant - self.k0)))

    def at(self, x):
        """Cubic Hermite evaluation of (rho, E) at arbitrary x in [0, L]."""
        if self._spline is None:
            rp = self.rho_prime
            self._spline = (CubicHermiteSpline(self.x1, self.rho, rp),
                            CubicHermiteSpline(self.x1, self.E, self.rho - self.params.b0))
        x = np.asarray(x, dtype=float)
        return self._spline[0](x), self._spline[1](x)

    def as_columns(self) -> dict:
        return {"x1": self.x1, "rho": self.rho, "E": self.E, "u": self.u,
                "Phi": self.Phi, "mach": self.mach, "invariant": self.invariant}


def _locate_exit(params, rho, E, h, lo, hi):
    """Bisect the step length s in (0, h] at which rho leaves [lo, hi]."""
    a, b = 0.0, h
    for _ in range(200):
        s = 0.5 * (a + b)
        r, _ = _rk4_step(params, rho, E, s)
        if lo <= r <= hi:
            a = s
        else:
            b = s
        if b - a <= 1e-15 * max(1.0, h):
            break
    return 0.5 * (a + b)


def integrate_background(params: GasParams, L: float, n_steps: int,
                         delta_bar: float | None = None,
                         band_tol: float = 1e-6) -> BackgroundSolution:
    """Integrate the background on [0, L] with fixed-step RK4.

    Parameters
    ----------
    params : GasParams
    L : float
        Length of the cylinder.
    n_steps : int
        Number of RK4 steps (>= 16); the grid has n_steps + 1 points.
    delta_bar : float, optional
        Required margin: delta_bar <= rho <= rho_s - delta_bar.
    band_tol : float
        Relative slack on the band, so that L returned by `max_length`
        is accepted at any resolution.

    Raises
    ------
    SonicBreakdownError
        If the orbit leaves the band before L; ``info["x1"]`` holds the
        breakdown location.
    """
    if n_steps < 16:
        raise ParameterError("n_steps must be at least 16")
    if not L > 0.0:
        raise ParameterError("L must be positive")
    if delta_bar is None:
        delta_bar = default_delta_bar(params)
    rs = params.rho_s
    slack = band_tol * rs
    lo, hi = delta_bar - slack, rs - delta_bar + slack
    if not lo <= params.rho0 <= hi:
        raise SonicBreakdownError("entrance density outside the admissible band", x1=0.0)
    h = L / n_steps
    x1 = np.linspace(0.0, L, n_steps + 1)
    rho = np.empty(n_steps + 1)
    E = np.empty(n_steps + 1)
    rho[0], E[0] = params.rho0, params.E0
    r, e = params.rho0, params.E0
    for i in range(n_steps):
        rn, en = _rk4_step(params, r, e, h)
        if not lo <= rn <= hi:
            s = _locate_exit(params, r, e, h, lo, hi)
            raise SonicBreakdownError(
                f"background left the band [{lo:.6g}, {hi:.6g}] at x1={i * h + s:.9g}",
                x1=i * h + s)
        r, e = rn, en
        rho[i + 1], E[i + 1] = r, e
    u = params.J0 / rho
    B0 = params.B0
    Phi = B0 + cumulative_simpson(E, x=x1, initial=0.0)
    return BackgroundSolution(params=params, x1=x1, rho=rho, E=E, u=u, Phi=Phi,
                              B0=B0, k0=params.k0, delta_bar=float(delta_bar))


class LengthBound(NamedTuple):
    """Result of `max_length`."""

    length: float
    capped: bool
    kind: str  # "breakdown", "entrance", "constant" or "periodic"


def max_length(params: GasParams, delta_bar: float, cap: float = 50.0,
               h: float = 1e-3) -> LengthBound:
    """Largest L for which the orbit stays in [delta_bar, rho_s - delta_bar].

    Integrates with step h until the band is left, then bisects the last
    step. Orbits that never leave the band return ``cap`` with
    ``capped=True``.
    """
    rs = params.rho_s
    if not 0.0 < delta_bar < 0.5 * rs:
        raise ParameterError("delta_bar must lie in (0, rho_s/2)")
    lo, hi = delta_bar, rs - delta_bar
    if not lo <= params.rho0 <= hi:
        return LengthBound(0.0, False, "entrance")
    if params.rho0 == params.b0 and params.E0 == 0.0:
        return LengthBound(float(cap), True, "constant")
    r, e = params.rho0, params.E0
    n = int(math.ceil(cap / h))
    h = cap / n
    for i in range(n):
        rn, en = _rk4_step(params, r, e, h)
        if not lo <= rn <= hi:
            s = _locate_exit(params, r, e, h, lo, hi)
            return LengthBound(i * h + s, False, "breakdown")
        r, e = rn, en
    return LengthBound(float(cap), True, "periodic")


def monotone_length(params: GasParams, delta_bar: float, cap: float = 50.0,
                    h: float = 1e-3) -> float:
    """Length of the initial stretch with E < 0 and rho' > 0, capped by `max_length`.

    Only meaningful for E0 = 0 and rho0 < b0.
    """
    Lbar = max_length(params, delta_bar, cap=cap, h=h).length
    if params.rho0 >= params.b0:
        return 0.0
    r, e = params.rho0, params.E0
    n = max(1, int(math.ceil(Lbar / h)))
    h = Lbar / n
    for i in range(n):
        rn, en = _rk4_step(params, r, e, h)
        if en >= 0.0 and i > 0:
            a, b = 0.0, h
            for _ in range(200):
                s = 0.5 * (a + b)
                if _rk4_step(params, r, e, s)[1] < 0.0:
                    a = s
                else:
                    b = s
            return i * h + a
        r, e = rn, en
    return Lbar
