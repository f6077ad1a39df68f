"""Entrance, exit and wall data with compatibility checks and the size sigma.

Every profile is a function of one cross-section coordinate s in [0, 1]:
the radius for the disk, and the normalized center distance
s = 2|x' - (1/2, 1/2)| for the unit square. A profile is
``base + shape(s)`` where ``base`` defaults to the background value of
that quantity, so the profile amplitude is the perturbation size.

The ion density is b(x1, x') = b_base + P(s) A(x1 / L) with a radial
profile P and an axial envelope A (constant 1 by default).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import make_interp_spline

from . import _fd
from .background import BackgroundSolution, GasParams
from .errors import ConfigError, ShapeError

NAMES = ("b", "u_en", "v_en", "w_en", "S_en", "E_en", "E_ex")
FAMILIES = ("constant", "bump", "cosine", "power", "poly", "csv")
VALUE_TOL = 1e-10
DERIV_TOL = 1e-6


def bump(t):
    """C-infinity bump exp(1 - 1/(1 - t^2)) on (-1, 1), peak 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass(frozen=True)
class Profile:
    """A named analytic or tabulated profile.

    Parameters
    ----------
    family : {"constant", "bump", "cosine", "power", "poly", "csv"}
    amplitude : float
        Scale of the shape (ignored for ``csv``).
    base : float or None
        Offset; None means "the background value".
    r0, r1 : float
        Support of the ``bump`` family.
    k : float
        Wavenumber of ``cosine``: cos(k pi s); window exponent of ``poly``.
    carrier : float
        Optional sin(carrier pi s) modulation of a ``bump``.
    power : float
        Exponent of the ``power`` family amplitude * s**power, and the
        axis factor of ``poly``: amplitude * s**power * (1 - (s/r1)**2)**k
        for s < r1, zero beyond.
    table : tuple of arrays or None
        (s, value) samples of a ``csv`` profile.
    """

    family: str = "constant"
    amplitude: float = 0.0
    base: float | None = None
    r0: float = 0.1
    r1: float = 0.6
    k: float = 1.0
    carrier: float = 0.0
    power: float = 1.0
    table: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown profile family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "bump" and not (0.0 <= self.r0 < self.r1):
            raise ConfigError("bump support needs 0 <= r0 < r1")
        if self.family == "csv" and self.table is None:
            raise ConfigError("csv profile without table")

    def shape(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        f = self.family
        if f == "constant":
            return np.full_like(s, self.amplitude)
        if f == "bump":
            mid, half = 0.5 * (self.r0 + self.r1), 0.5 * (self.r1 - self.r0)
            out = self.amplitude * bump((s - mid) / half)
            if self.carrier:
                out = out * np.sin(self.carrier * np.pi * s)
            return out
        if f == "cosine":
            return self.amplitude * np.cos(self.k * np.pi * s)
        if f == "power":
            return self.amplitude * np.abs(s) ** self.power
        if f == "poly":
            win = np.clip(1.0 - (s / self.r1) ** 2, 0.0, None) ** self.k
            return self.amplitude * np.abs(s) ** self.power * win
        ts, tv = self.table
        spl = make_interp_spline(ts, tv, k=min(5, len(ts) - 1))
        return spl(np.clip(s, ts[0], ts[-1]))

    def scaled(self, c: float) -> "Profile":
        if self.family == "csv":
            ts, tv = self.table
            return replace(self, table=(ts, c * np.asarray(tv)))
        return replace(self, amplitude=c * self.amplitude)


def read_profile_csv(path) -> tuple:
    """Read a two-column ``r,value`` CSV; r must be strictly increasing.

    Comment lines start with '#'; a non-numeric first row is a header.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"profile file not found: {path}")
    rs, vs = [], []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}:{lineno}: expected two columns r,value", line=lineno)
            try:
                r, v = float(row[0]), float(row[1])
            except ValueError:
                if not rs:
                    continue  # header
                raise ConfigError(f"{path}:{lineno}: non-numeric entry", line=lineno) from None
            if rs and r <= rs[-1]:
                raise ConfigError(f"{path}:{lineno}: r column is not strictly increasing",
                                  line=lineno)
            rs.append(r)
            vs.append(v)
    if len(rs) < 4:
        raise ConfigError(f"{path}: need at least 4 samples")
    return np.array(rs), np.array(vs)


def background_reference(params: GasParams, E_exit: float) -> dict:
    """Background value of each boundary quantity."""
    return {"b": params.b0, "u_en": params.u0, "v_en": 0.0, "w_en": 0.0,
            "S_en": params.S0, "E_en": 0.0, "E_ex": float(E_exit)}


@dataclass(frozen=True)
class BoundaryData:
    """Boundary data of a scenario.

    Attributes
    ----------
    shape : {"disk", "rectangle"}
    eps_bar : float
        Collar width in (0, 1/4].
    profiles : dict
        Profile per name in NAMES (missing names are unperturbed).
    reference : dict
        Background value per name.
    b_axial : Profile
        Axial envelope A(t), t = x1/L, of the ion-density deviation.
    """

    shape: str
    eps_bar: float
    profiles: dict
    reference: dict
    b_axial: Profile = Profile("constant", amplitude=1.0, base=0.0)

    def __post_init__(self):
        if self.shape not in ("disk", "rectangle"):
            raise ConfigError(f"unsupported cross-section {self.shape!r}")
        if not (0.0 < self.eps_bar <= 0.25):
            raise ConfigError("eps_bar must lie in (0, 1/4]")
        unknown = set(self.profiles) - set(NAMES)
        if unknown:
            raise ConfigError(f"unknown boundary quantities: {sorted(unknown)}")

    @classmethod
    def unperturbed(cls, params: GasParams, E_exit: float, shape: str = "disk",
                    eps_bar: float = 0.25) -> "BoundaryData":
        return cls(shape, eps_bar, {}, background_reference(params, E_exit))

    def profile(self, name: str) -> Profile:
        if name not in NAMES:
            raise ConfigError(f"unknown boundary quantity {name!r}")
        return self.profiles.get(name, Profile())

    def coord(self, x2, x3=None) -> np.ndarray:
        """Profile coordinate s of cross-section points."""
        x2 = np.asarray(x2, dtype=float)
        if self.shape == "disk":
            return np.abs(x2)
        if x3 is None:
            raise ShapeError("rectangle points need two coordinates")
        return 2.0 * np.hypot(x2 - 0.5, np.asarray(x3, dtype=float) - 0.5)

    def base(self, name: str) -> float:
        p = self.profile(name)
        return self.reference[name] if p.base is None else float(p.base)

    def deviation(self, name: str, s) -> np.ndarray:
        """value - background value, as a function of s."""
        return (self.base(name) - self.reference[name]) + self.profile(name).shape(s)

    def value(self, name: str, s) -> np.ndarray:
        return self.reference[name] + self.deviation(name, s)

    def b_value(self, x1, s, L: float) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        return self.base("b") + self.profile("b").shape(s) * self.b_axial.shape(x1 / L)

    def scaled(self, c: float) -> "BoundaryData":
        """Data whose deviations are c times the current ones (bases must be default)."""
        if any(self.profile(n).base is not None and self.base(n) != self.reference[n]
               for n in NAMES):
            raise ConfigError("scaling requires profiles based on the background")
        return replace(self, profiles={n: p.scaled(c) for n, p in self.profiles.items()})

    def is_trivial(self, names=NAMES) -> bool:
        s = np.linspace(0.0, 1.0 if self.shape == "disk" else np.sqrt(2.0), 257)
        return all(np.all(self.deviation(n, s) == 0.0) for n in names)


# ----------------------------------------------------------------- validation

@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    flag_only: bool = False

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "worst": float(self.worst),
                "flag_only": bool(self.flag_only)}


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if not c.flag_only)

    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed and not c.flag_only]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.as_dict() for c in self.checks]}


def _radial_derivs(f, h, kmax):
    return [f] + [_fd.derivative(f, h, order=j) for j in range(1, kmax + 1)]


def _check(name, worst, tol, flag_only=False):
    worst = float(worst)
    return Check(name, worst <= tol, worst, flag_only)


def _square_grid(n):
    x = np.linspace(0.0, 1.0, n)
    return x, np.meshgrid(x, x, indexing="ij")


def validate(data: BoundaryData, params: GasParams, n: int = 801) -> ValidationReport:
    """Check every compatibility condition of the boundary data.

    Value conditions use a tolerance of 1e-10, derivative conditions
    1e-6 with fourth-order one-sided differences at the ends. The
    condition on d_r E_en away from the wall and the axis is reported
    as a flag only.

    Returns
    -------
    ValidationReport
    """
    if n < 17:
        raise ShapeError("validation grid too coarse")
    eb = data.eps_bar
    checks = []
    if data.shape == "disk":
        r = np.linspace(0.0, 1.0, n)
        h = r[1] - r[0]
        collar = r >= 1.0 - eb - 1e-14
        dev = {k: data.deviation(k, r) for k in NAMES}
        d = {k: _radial_derivs(v, h, 3) for k, v in dev.items()}
        checks.append(_check("axis:v_en", abs(dev["v_en"][0]), VALUE_TOL))
        checks.append(_check("axis:w_en", abs(dev["w_en"][0]), VALUE_TOL))
        for key in ("E_en", "v_en", "w_en", "S_en"):
            checks.append(_check(f"collar:{key}", np.max(np.abs(dev[key][collar])), VALUE_TOL))
        # d_x1 b on the collar at x1 = 0, measured in t = x1/L
        dA0 = _fd.derivative(data.b_axial.shape(np.linspace(0.0, 0.05, 17)), 0.05 / 16)[0]
        checks.append(_check("collar:dx1_b",
                             np.max(np.abs(data.profile("b").shape(r[collar]))) * abs(dA0),
                             DERIV_TOL))
        for key in ("b", "u_en", "E_en", "E_ex"):
            checks.append(_check(f"wall:dn_{key}", abs(d[key][1][-1]), DERIV_TOL))
        checks.append(_check("axis:dr_w_en",
                             max(abs(d["w_en"][k][0]) for k in (1, 2, 3)), DERIV_TOL))
        checks.append(_check("axis:dr_S_en",
                             max(abs(d["S_en"][k][0]) for k in (1, 2, 3)), DERIV_TOL))
        checks.append(_check("axis:dr_E_en", abs(d["E_en"][1][0]), DERIV_TOL))
        checks.append(_check("axis:dr_E_ex", abs(d["E_ex"][1][0]), DERIV_TOL))
        checks.append(_check("interior:dr_E_en", np.max(np.abs(d["E_en"][1])), DERIV_TOL,
                             flag_only=True))
        return ValidationReport(checks)

    m = max(33, int(np.sqrt(n)) * 4 + 1)
    x, (X2, X3) = _square_grid(m)
    h = x[1] - x[0]
    s = data.coord(X2, X3)
    dist = np.minimum.reduce([X2, 1.0 - X2, X3, 1.0 - X3])
    collar = dist <= eb + 1e-14
    dev = {k: data.deviation(k, s) for k in NAMES}
    center = data.coord(0.5, 0.5)
    checks.append(_check("axis:v_en", abs(float(data.deviation("v_en", center))), VALUE_TOL))
    checks.append(_check("axis:w_en", abs(float(data.deviation("w_en", center))), VALUE_TOL))
    for key in ("E_en", "v_en", "w_en", "S_en"):
        checks.append(_check(f"collar:{key}", np.max(np.abs(dev[key][collar])), VALUE_TOL))
    dA0 = _fd.derivative(data.b_axial.shape(np.linspace(0.0, 0.05, 17)), 0.05 / 16)[0]
    checks.append(_check("collar:dx1_b",
                         np.max(np.abs(data.profile("b").shape(s[collar]))) * abs(dA0), DERIV_TOL))
    for key in ("b", "u_en", "E_en", "E_ex"):
        g2 = _fd.derivative(dev[key], h, axis=0)
        g3 = _fd.derivative(dev[key], h, axis=1)
        worst = max(np.max(np.abs(g2[[0, -1], :])), np.max(np.abs(g3[:, [0, -1]])))
        checks.append(_check(f"wall:dn_{key}", worst, DERIV_TOL))
    return ValidationReport(checks)


# ---------------------------------------------------------------------- sigma

def _ck_terms_1d(f, h, k):
    """[max|f|, max|f'|, ..., max|f^(k)|] by fourth-order differences."""
    return [float(np.max(np.abs(g))) for g in _radial_derivs(f, h, k)]


def _ck_terms_2d(f, h, k):
    """Per order j: max over multi-indices of order j of max|d^alpha f|."""
    out = []
    cache = {(0, 0): f}
    for j in range(k + 1):
        best = 0.0
        for a in range(j + 1):
            b = j - a
            key = (a, b)
            if key not in cache:
                if b > 0:
                    cache[key] = _fd.derivative(cache[(a, b - 1)], h, axis=1)
                else:
                    cache[key] = _fd.derivative(cache[(a - 1, 0)], h, axis=0)
            best = max(best, float(np.max(np.abs(cache[key]))))
        out.append(best)
    return out


def ck_norm(data: BoundaryData, name: str, k: int, n: int = 801) -> float:
    """Discrete C^k norm sum_j max|D^j (value - background)| of one profile."""
    if data.shape == "disk":
        r = np.linspace(0.0, 1.0, n)
        return float(sum(_ck_terms_1d(data.deviation(name, r), r[1] - r[0], k)))
    m = max(33, int(np.sqrt(n)) * 4 + 1)
    x, (X2, X3) = _square_grid(m)
    return float(sum(_ck_terms_2d(data.deviation(name, data.coord(X2, X3)), x[1] - x[0], k)))


def b_c2_norm(data: BoundaryData, L: float, n: int = 801) -> float:
    """C^2 norm of b - b0 on the cylinder, exact for the separable form."""
    t = np.linspace(0.0, 1.0, 401)
    A = _ck_terms_1d(data.b_axial.shape(t), (t[1] - t[0]) * L, 2)
    if data.shape == "disk":
        r = np.linspace(0.0, 1.0, n)
        P = _ck_terms_1d(data.profile("b").shape(r), r[1] - r[0], 2)
    else:
        m = max(33, int(np.sqrt(n)) * 4 + 1)
        x, (X2, X3) = _square_grid(m)
        P = _ck_terms_2d(data.profile("b").shape(data.coord(X2, X3)), x[1] - x[0], 2)
    off = abs(data.base("b") - data.reference["b"])
    total = 0.0
    for j in range(3):
        total += max(A[a] * P[j - a] for a in range(j + 1))
    return total + off


def sigma(data: BoundaryData, params: GasParams, background: BackgroundSolution | None = None,
          n: int = 801) -> float:
    """Perturbation size of the boundary data.

    sigma = |b - b0|_{C2} + |u_en - u0|_{C3}
            + |(v_en, w_en, E_en, S_en - S0)|_{C4} + |E_ex - E_bar(L)|_{C4},

    with each discrete C^k norm the sum over orders j <= k of the grid
    maximum of the j-th derivatives.
    """
    ref = background_reference(params, data.reference["E_ex"] if background is None
                               else float(background.E[-1]))
    if any(not np.isclose(ref[k], data.reference[k], rtol=0, atol=1e-13) for k in NAMES):
        raise ConfigError("boundary data was built for a different background")
    L = 1.0 if background is None else background.L
    total = b_c2_norm(data, L, n)
    total += ck_norm(data, "u_en", 3, n)
    for key in ("v_en", "w_en", "E_en", "S_en", "E_ex"):
        total += ck_norm(data, key, 4, n)
    return float(total)
