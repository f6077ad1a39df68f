"""Energy-weight construction for the hyperbolic H^1 estimate on a decelerating background.

The weight is a translated, normalized Mach number

    W(x1) = (M(x1 + a) / K)^eta = R_a(x1)^eta,   K = M(a),

and the coercivity function

    alpha = (abar1 W - W'/2) - 2 (bbar1 W)^2 - (2/hbar1) (bbar2 W + hbar2)^2

splits into four negative terms N1..N4 and two positive terms P1, P2.
Every quantity is evaluated along two independent paths:

* the coefficient form, from sampled (rho_bar, E_bar) and the linearized
  coefficients;
* the kappa form, where kappa = u_bar / u_s and -E_bar is recovered from
  the phase-plane invariant through the closed-form primitive F(kappa).

`find_eta` picks the smallest admissible exponent from the explicit
candidate bounds and certifies alpha >= mu and d_1(abar22 W) >= mu on
the scan grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .background import (BackgroundSolution, GasParams, default_delta_bar, integrate_background,
                         monotone_length)
from .errors import ConfigError, OutOfRegimeError

TERMS = ("N1", "N2", "N3", "N4", "P1", "P2")

# Certification window used by default. The weight decays like R^eta with
# eta in the hundreds, so only short windows certify on the sample set.
DEFAULT_CERT_LENGTH = 0.02


# --------------------------------------------------------------- kappa form

def F_kappa(params: GasParams, kappa):
    """F(kappa) = int_1^kappa (1 - t/zeta0)(1 - t^-(gamma+1)) dt in closed form."""
    g = params.gamma
    k = np.asarray(kappa, dtype=float)
    z0 = zeta0(params)
    return ((k - 1.0) + (k ** (-g) - 1.0) / g - (k * k - 1.0) / (2.0 * z0)
            + (k ** (1.0 - g) - 1.0) / ((1.0 - g) * z0))


def zeta0(params: GasParams) -> float:
    return params.J0 / (params.b0 * params.u_s)


def lambda0(params: GasParams) -> float:
    return params.h0 ** 2 * params.J0 ** (2.0 * (params.gamma - 1.0) / (params.gamma + 1.0))


def _amp(params: GasParams) -> float:
    # 2 h0 J0^(2 gamma/(gamma+1)), the scale in front of F
    return 2.0 * params.h0 * params.J0 ** (2.0 * params.gamma / (params.gamma + 1.0))


def kappa_k0(params: GasParams) -> float:
    """k0 = E0^2/2 - H(rho0) written through F, with E0 = 0."""
    k_in = params.J0 / (params.rho0 * params.u_s)
    return -0.5 * _amp(params) * float(F_kappa(params, k_in))


def minus_E_kappa(params: GasParams, kappa, k0: float | None = None):
    """-E_bar = sqrt(2 h0 J0^(2g/(g+1)) F(kappa) + 2 k0), clipped at 0."""
    k0 = kappa_k0(params) if k0 is None else k0
    rad = _amp(params) * F_kappa(params, kappa) + 2.0 * k0
    return np.sqrt(np.maximum(rad, 0.0))


def kappa_of(params: GasParams, rho):
    return params.J0 / (np.asarray(rho, dtype=float) * params.u_s)


# ------------------------------------------------------------------ samples

@dataclass
class _Samples:
    params: GasParams
    a: float
    L: float
    x1: np.ndarray
    rho: np.ndarray
    E: np.ndarray
    rho_a: np.ndarray
    E_a: np.ndarray


def _samples(background: BackgroundSolution, a_frak: float, L: float | None, n: int | None,
             refine: int = 4) -> _Samples:
    if a_frak <= 0:
        raise ConfigError("a_frak must be positive")
    Lmax = background.L - a_frak
    L = Lmax if L is None else float(L)
    if L <= 0 or L > Lmax * (1 + 1e-12):
        raise OutOfRegimeError("background must extend to [0, L + a_frak]", L=L,
                               available=background.L)
    n = n or (background.x1.size - 1)
    m = max(16, int(round(refine * n * L / background.L)))
    x1 = np.linspace(0.0, L, m + 1)
    rho, E = background.at(x1)
    rho_a, E_a = background.at(np.minimum(x1 + a_frak, background.L))
    s = _Samples(background.params, float(a_frak), L, x1, rho, E, rho_a, E_a)
    _check_regime(s)
    return s


def _check_regime(s: _Samples):
    prm = s.params
    E_all = np.concatenate([s.E[1:], s.E_a])
    if np.any(E_all >= 0.0):
        raise OutOfRegimeError("E_bar must be negative on (0, L + a_frak]",
                               max_E=float(E_all.max()))
    c2 = prm.gamma * prm.S0 * s.rho_a ** (prm.gamma - 1.0)
    u = prm.J0 / s.rho_a
    if np.any(u <= np.sqrt(c2)):
        raise OutOfRegimeError("background must stay supersonic on [0, L + a_frak]")


# ----------------------------------------------------------- coefficient form

def _mach(params: GasParams, rho):
    return params.J0 / np.sqrt(params.gamma * params.S0) * rho ** (-(params.gamma + 1.0) / 2.0)


def _coefficient_terms(s: _Samples, eta: float) -> dict:
    """N1..N4, P1, P2, alpha and d_1(abar22 W) from the linearized coefficients."""
    prm = s.params
    g = prm.gamma
    u = prm.J0 / s.rho
    c2 = g * prm.S0 * s.rho ** (g - 1.0)
    D = c2 - u * u
    abar1 = s.E * (g * u * u + c2) / D ** 2
    bbar1 = u / D
    bbar2 = -(g - 1.0) * s.E * u / D ** 2
    hbar1 = s.rho ** (2.0 - g) / (g * prm.S0)
    hbar2 = -u * hbar1
    K = float(_mach(prm, s.rho_a[0]))
    R = _mach(prm, s.rho_a) / K
    # rho'/rho = E/D from the background ODE, so M'/M = -(g+1)/2 * E/D
    D_a = g * prm.S0 * s.rho_a ** (g - 1.0) - (prm.J0 / s.rho_a) ** 2
    dR = -(g + 1.0) / 2.0 * R * s.E_a / D_a
    W = R ** eta
    dW = eta * R ** (eta - 1.0) * dR
    alpha = (abar1 * W - 0.5 * dW) - 2.0 * (bbar1 * W) ** 2 \
        - 2.0 / hbar1 * (bbar2 * W + hbar2) ** 2
    M = _mach(prm, s.rho)
    dM = -(g + 1.0) / 2.0 * M * s.E / D
    a22 = -1.0 / (M * M - 1.0)
    da22 = 2.0 * M * dM / (M * M - 1.0) ** 2
    terms = {
        "N1": abar1 * W,
        "N2": -2.0 * (bbar1 * W) ** 2,
        "N3": -2.0 / hbar1 * (bbar2 * W) ** 2,
        "N4": -2.0 * hbar2 ** 2 / hbar1,
        "P1": -0.5 * dW,
        "P2": -4.0 * bbar2 * W * hbar2 / hbar1,
    }
    return {"terms": terms, "alpha": alpha, "R": R, "dR": dR, "K": K, "a22": a22,
            "da22": da22, "W": W, "d_a22W": da22 * W + a22 * dW}


def _kappa_terms(s: _Samples, eta: float) -> dict:
    """The same six terms through kappa, F(kappa) and the invariant."""
    prm = s.params
    g = prm.gamma
    h0, J0 = prm.h0, prm.J0
    lam0 = lambda0(prm)
    k, ka = kappa_of(prm, s.rho), kappa_of(prm, s.rho_a)
    K = float(ka[0]) ** ((g + 1.0) / 2.0)
    R = ka ** ((g + 1.0) / 2.0) / K
    Rn = R ** eta
    sq, sq_a = minus_E_kappa(prm, k), minus_E_kappa(prm, ka)
    dk = k * k - k ** (1.0 - g)
    dk_a = ka * ka - ka ** (1.0 - g)
    terms = {
        "N1": -sq * (g * k * k + k ** (1.0 - g)) / (lam0 * dk ** 2) * Rn,
        "N2": -2.0 * k * k / (lam0 * dk ** 2) * Rn ** 2,
        "N3": -2.0 * k ** (2.0 - g) * ((g - 1.0) * k * sq) ** 2
        / (h0 ** 3 * J0 ** ((4.0 * g - 2.0) / (g + 1.0)) * dk ** 4) * Rn ** 2,
        "N4": -2.0 / h0 * J0 ** (2.0 / (g + 1.0)) * k ** g,
        "P1": eta * (g + 1.0) / 4.0 * sq_a / (lam0 * dk_a) * Rn,
        "P2": 4.0 * (g - 1.0) * k * k * sq / (lam0 * dk ** 2) * Rn,
    }
    return {"terms": terms, "alpha": sum(terms.values()), "R": R, "K": K, "kappa": k,
            "kappa_a": ka, "minus_E": sq, "minus_E_a": sq_a, "lam0": lam0}


def _eta_candidates(s: _Samples, co: dict, kf: dict) -> dict:
    """Lower bounds on eta whose maximum is the admissible exponent."""
    prm = s.params
    g = prm.gamma
    lam0 = kf["lam0"]
    k, ka = kf["kappa"], kf["kappa_a"]
    sq, sq_a = kf["minus_E"], kf["minus_E_a"]
    dk = k * k - k ** (1.0 - g)
    dk_a = ka * ka - ka ** (1.0 - g)
    amp_h = prm.h0 * prm.J0 ** (2.0 * g / (g + 1.0))
    b = (g + 1.0) / 16.0 * sq_a / dk_a
    beta1 = sq * (g * k * k + k ** (1.0 - g)) / dk ** 2
    beta2s = 2.0 * k * k / dk ** 2
    beta3s = 2.0 * (g - 1.0) ** 2 * k ** (4.0 - g) * sq ** 2 / (amp_h * dk ** 4)
    beta4s = 2.0 / prm.h0 * prm.J0 ** (2.0 / (g + 1.0)) * float(k[0]) ** g
    c0 = float(b[0]) / lam0
    R, dR = co["R"], co["dR"]
    with np.errstate(divide="ignore", invalid="ignore"):
        l0 = (1.0 - co["da22"]) * R / (co["a22"] * dR)
    # b vanishes where E_bar(x1 + a) would; a > 0 keeps it positive
    return {
        "l0": float(np.max(l0)),
        "beta1": float(np.max((lam0 / 4.0 + beta1) / b)),
        "beta2": float(np.max((lam0 / 4.0 + beta2s) / b)),
        "beta3": float(np.max((lam0 / 4.0 + beta3s) / b)),
        "beta4": (0.25 + beta4s) / c0,
        "_b": b, "_c0": c0, "_beta4_star": beta4s,
    }


# ------------------------------------------------------------------ reports

@dataclass
class WeightReport:
    """Outcome of a weight construction on [0, L]."""

    a_frak: float
    eta: float
    mu: float
    L: float
    x1: np.ndarray
    weight_profile: np.ndarray
    alpha_profile: np.ndarray
    alpha_kappa: np.ndarray
    d_a22_weight: np.ndarray
    term_profiles: dict
    l0: float
    candidates: dict
    K: float
    flatness_d: float
    flatness_ok: bool
    passed: bool
    violation: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def path_gap(self) -> float:
        """max |alpha_kappa - alpha_coefficient| on the grid."""
        return float(np.max(np.abs(self.alpha_kappa - self.alpha_profile)))

    def columns(self) -> dict:
        out = {"x1": self.x1, "weight": self.weight_profile, "alpha": self.alpha_profile,
               "alpha_kappa": self.alpha_kappa, "d1_a22_weight": self.d_a22_weight}
        out.update({k: self.term_profiles[k] for k in TERMS})
        return out

    def as_dict(self) -> dict:
        return {"a_frak": self.a_frak, "L": self.L, "eta": self.eta, "mu": self.mu,
                "pass": self.passed, "l0": self.l0, "K": self.K,
                "candidates": {k: v for k, v in self.candidates.items() if not k.startswith("_")},
                "min_alpha": float(self.alpha_profile.min()),
                "min_d1_a22_weight": float(self.d_a22_weight.min()),
                "path_gap": self.path_gap, "flatness_d": self.flatness_d,
                "flatness_ok": self.flatness_ok, "violation": self.violation,
                "n_points": int(self.x1.size), **self.diagnostics}


def weight_function(background: BackgroundSolution, a_frak: float, eta: float,
                    L: float | None = None, n: int | None = None, refine: int = 4):
    """x1 grid on [0, L] and the weight (M(x1 + a)/M(a))^eta.

    Also returns the same weight through kappa_a^((gamma+1)/2)/K as a
    second array for cross-checking.
    """
    s = _samples(background, a_frak, L, n, refine)
    co = _coefficient_terms(s, eta)
    kf = _kappa_terms(s, eta)
    return s.x1, co["W"], kf["R"] ** eta


def alpha_decomposition(background: BackgroundSolution, a_frak: float, eta: float,
                        L: float | None = None, n: int | None = None, refine: int = 4) -> dict:
    """Six term profiles (kappa form), alpha from both paths, and their gap."""
    s = _samples(background, a_frak, L, n, refine)
    co = _coefficient_terms(s, eta)
    kf = _kappa_terms(s, eta)
    return {"x1": s.x1, "terms": kf["terms"], "terms_coefficient": co["terms"],
            "alpha": co["alpha"], "alpha_kappa": kf["alpha"],
            "gap": float(np.max(np.abs(co["alpha"] - kf["alpha"]))),
            "minus_E_gap": float(np.max(np.abs(kf["minus_E"] + s.E)))}


def certify(background: BackgroundSolution, a_frak: float, eta: float,
            L: float | None = None, n: int | None = None, refine: int = 4,
            candidates: dict | None = None) -> WeightReport:
    """Check alpha >= mu and d_1(abar22 W) >= mu for a given eta.

    mu = min{R^eta(L), 3/4 R^eta(L) + 1/8}. The flatness constant d is
    measured as (u(a) - min u on [a, L + a]) / u_s, and `flatness_ok`
    states whether eta c(x1) - beta4(x1) >= 1/8 held on the grid.
    """
    s = _samples(background, a_frak, L, n, refine)
    co = _coefficient_terms(s, eta)
    kf = _kappa_terms(s, eta)
    cand = candidates or _eta_candidates(s, co, kf)
    RL = float(co["R"][-1]) ** eta
    mu = min(RL, 0.75 * RL + 0.125)
    prm = s.params
    u_a = prm.J0 / s.rho_a
    d = float((u_a[0] - u_a.min()) / prm.u_s)
    c = cand["_b"] / kf["lam0"] * kf["R"] ** eta
    beta4 = 2.0 / prm.h0 * prm.J0 ** (2.0 / (prm.gamma + 1.0)) * kf["kappa"] ** prm.gamma
    flat_ok = bool(np.all(eta * c - beta4 >= 0.125 - 1e-12))
    viol = None
    fa = co["alpha"] - mu
    fb = co["d_a22W"] - mu
    if fa.min() < 0 or fb.min() < 0:
        which = "alpha" if fa.min() <= fb.min() else "d1_a22_weight"
        arr = fa if which == "alpha" else fb
        j = int(np.argmin(arr))
        viol = {"condition": which, "x1": float(s.x1[j]), "margin": float(arr[j])}
    return WeightReport(
        a_frak=s.a, eta=float(eta), mu=float(mu), L=s.L, x1=s.x1, weight_profile=co["W"],
        alpha_profile=co["alpha"], alpha_kappa=kf["alpha"], d_a22_weight=co["d_a22W"],
        term_profiles=kf["terms"], l0=cand["l0"], candidates=cand, K=co["K"],
        flatness_d=d, flatness_ok=flat_ok, passed=viol is None and mu > 0, violation=viol,
        diagnostics={"minus_E_gap": float(np.max(np.abs(kf["minus_E"] + s.E))),
                     "k0_gap": abs(kappa_k0(prm) - prm.k0)})


def find_eta(background: BackgroundSolution, a_frak: float, L: float | None = None,
             n: int | None = None, refine: int = 4):
    """Admissible exponent, certified mu and the full report.

    eta is the maximum of l0 and the four explicit bounds built from
    beta1, beta2*, beta3* and beta4*. Failure is reported, not raised.
    """
    s = _samples(background, a_frak, L, n, refine)
    co = _coefficient_terms(s, 1.0)
    kf = _kappa_terms(s, 1.0)
    cand = _eta_candidates(s, co, kf)
    eta = max(v for k, v in cand.items() if not k.startswith("_"))
    rep = certify(background, a_frak, eta, L, n, refine, cand)
    return rep.eta, rep.mu, rep


def max_certified_length(background: BackgroundSolution, a_frak: float, n: int | None = None,
                         refine: int = 4, rtol: float = 1e-3, hypothesis: bool = False) -> float:
    """Largest window L (bisection) for which `find_eta` certifies.

    With ``hypothesis=True`` the flatness hypothesis is required as well.
    Returns 0.0 if even the shortest probe window fails.
    """
    lo, hi = 0.0, background.L - a_frak
    while hi - lo > rtol * max(hi, 1e-12):
        mid = 0.5 * (lo + hi)
        rep = find_eta(background, a_frak, mid, n, refine)[2]
        ok = rep.passed and (rep.flatness_ok or not hypothesis)
        lo, hi = (mid, hi) if ok else (lo, mid)
    return lo


def sample_background(params: GasParams, a_frak: float | None = None, n_steps: int = 4096,
                      delta_bar: float | None = None):
    """Background on [0, L*] with L* the monotone length, plus a default a = L*/4."""
    delta_bar = default_delta_bar(params) if delta_bar is None else delta_bar
    Lstar = float(monotone_length(params, delta_bar))
    bg = integrate_background(params, Lstar, n_steps, delta_bar)
    return bg, (0.25 * Lstar if a_frak is None else float(a_frak))


def dense_oracle(params: GasParams, a_frak: float, L: float, eta: float, mu: float,
                 n_steps: int = 40960, delta_bar: float | None = None,
                 base_intervals: int | None = None, factor: int = 10) -> dict:
    """Recompute both certified minima on an independent, much finer background.

    With `base_intervals` (the interval count of the certified grid on
    [0, L]) the step count is raised so the oracle grid is at least
    `factor` times finer.
    """
    if base_intervals is not None:
        n_steps = max(n_steps, int(np.ceil(factor * base_intervals * (L + a_frak) / L)))
    bg = integrate_background(params, L + a_frak, n_steps, delta_bar)
    s = _samples(bg, a_frak, L, n_steps, refine=1)
    co = _coefficient_terms(s, eta)
    return {"min_alpha": float(co["alpha"].min()), "min_d1_a22_weight": float(co["d_a22W"].min()),
            "margin_alpha": float(co["alpha"].min() - mu),
            "margin_d1_a22_weight": float(co["d_a22W"].min() - mu), "n_points": int(s.x1.size)}
