import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epcyl.background import (GasParams, H_potential, default_delta_bar, integrate_background,
                              max_length, monotone_length, phase_invariant, sonic_density)
from epcyl.errors import ParameterError, SonicBreakdownError


def test_sonic_density_closed_form(sample_params):
    p = sample_params
    rs = sonic_density(p)
    assert rs == pytest.approx((1.0 / 2.0) ** (1.0 / 3.0), rel=1e-15)
    # sound speed equals flow speed at rho_s
    assert p.gamma * p.S0 * rs ** (p.gamma - 1) == pytest.approx((p.J0 / rs) ** 2, rel=1e-14)


@pytest.mark.parametrize("kw", [dict(gamma=1.0), dict(J0=0.0), dict(S0=-1.0), dict(b0=0.9),
                                dict(rho0=0.0), dict(E0=0.1), dict(gamma=float("nan"))])
def test_params_rejected(kw):
    base = dict(gamma=2.0, J0=1.0, S0=1.0, b0=0.6, rho0=0.4)
    base.update(kw)
    with pytest.raises(ParameterError):
        GasParams(**base)


def test_equilibrium_is_constant():
    p = GasParams(2.0, 1.0, 1.0, 0.5, 0.5)
    bg = integrate_background(p, 3.0, 512)
    assert np.all(bg.rho == 0.5)
    assert np.all(bg.E == 0.0)
    assert np.all(bg.u == p.J0 / 0.5)


def test_invariant_drift_sample(sample_params):
    bg = integrate_background(sample_params, 0.3, 4096)
    assert bg.invariant_drift() <= 1e-10
    ref = integrate_background(sample_params, 0.3, 40960)
    assert np.max(np.abs(bg.rho - ref.rho[::10])) < 1e-12


def test_breakdown_at_entrance():
    rs = GasParams(2.0, 1.0, 1.0, 0.6, 0.4).rho_s
    p = GasParams(2.0, 1.0, 1.0, 0.5, 0.999 * rs)
    with pytest.raises(SonicBreakdownError) as ei:
        integrate_background(p, 20.0, 4096)
    assert ei.value.info["x1"] == 0.0


def test_breakdown_location_reported(sample_params):
    db = default_delta_bar(sample_params)
    Lbar = max_length(sample_params, db).length
    with pytest.raises(SonicBreakdownError) as ei:
        integrate_background(sample_params, Lbar + 0.5, 8192, db)
    assert ei.value.info["x1"] == pytest.approx(Lbar, abs=1e-6)


def test_phase_invariant_trivial_values(sample_params):
    p = sample_params
    assert phase_invariant(p, p.rho_s, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert phase_invariant(p, p.rho0, 0.0) == pytest.approx(-H_potential(p, p.rho0), abs=1e-15)


def test_H_matches_riemann_sum(sample_params):
    p = sample_params
    rho, n = 0.5, 10 ** 6
    # midpoint rule on [rho, rho_s]
    t = rho + (np.arange(n) + 0.5) * (p.rho_s - rho) / n
    f = (t - p.b0) / t * (p.gamma * p.S0 * t ** (p.gamma - 1) - p.J0 ** 2 / t ** 2)
    riemann = -np.sum(f) * (p.rho_s - rho) / n
    assert H_potential(p, rho) == pytest.approx(riemann, abs=1e-9)
    assert H_potential(p, rho, method="quad") == pytest.approx(riemann, abs=1e-9)


def test_max_length_cases(sample_params):
    p = sample_params
    eq = GasParams(2.0, 1.0, 1.0, 0.5, 0.5)
    lb = max_length(eq, 0.01)
    assert lb.capped and lb.kind == "constant"
    lb = max_length(p, 0.75 * p.rho_s - 0.2)   # rho0 = 0.4 lies below the margin
    assert lb.length == 0.0 and lb.kind == "entrance"
    db = default_delta_bar(p)
    a, b = max_length(p, db, h=1e-3).length, max_length(p, db, h=5e-4).length
    assert a > 0 and abs(a - b) <= 1e-6
    with pytest.raises(ParameterError):
        max_length(p, p.rho_s)


def test_monotone_regime(sample_params):
    p = sample_params
    db = default_delta_bar(p)
    L = monotone_length(p, db)
    bg = integrate_background(p, L, 4096, db)
    assert np.all(bg.E[1:] < 0)
    assert np.all(bg.rho_prime[1:] > 0)
    assert np.all(bg.mach > 1.0)
    assert np.all(bg.rho * bg.u == pytest.approx(p.J0, rel=1e-15))


def test_invariant_order(sample_params):
    p = sample_params
    L = 2.0
    drift = [integrate_background(p, L, n).invariant_drift() for n in (64, 128, 256)]
    orders = np.log2(np.array(drift[:-1]) / np.array(drift[1:]))
    assert np.all(orders >= 3.5)


@settings(max_examples=15, deadline=None)
@given(rho0=st.floats(0.2, 0.55), b0=st.floats(0.3, 0.7))
def test_mass_flux_exact(rho0, b0):
    p = GasParams(2.0, 1.0, 1.0, b0, rho0)
    try:
        bg = integrate_background(p, 0.2, 64)
    except SonicBreakdownError:
        return
    np.testing.assert_allclose(bg.rho * bg.u, p.J0, rtol=2e-16 * 4)
    assert np.all(bg.mach > 1.0)
