import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epcyl.background import integrate_background
from epcyl.boundary_data import (BoundaryData, Profile, background_reference, read_profile_csv,
                                 sigma, validate)
from epcyl.errors import ConfigError, ShapeError


def data(params, shape="disk", **profiles):
    return BoundaryData(shape, 0.25, profiles, background_reference(params, -0.1))


def compliant_v():
    return Profile("bump", amplitude=1e-3, r0=0.1, r1=0.6, carrier=1.0)


def test_unperturbed_passes(sample_params):
    for shape in ("disk", "rectangle"):
        rep = validate(data(sample_params, shape), sample_params)
        assert rep.ok, rep.failed()


def test_linear_v_fails_collar(sample_params):
    rep = validate(data(sample_params, v_en=Profile("power", amplitude=1.0, power=1.0)),
                   sample_params)
    assert not rep.ok
    assert "collar:v_en" in rep.failed()
    assert rep["axis:v_en"].passed


def test_compliant_bump_passes(sample_params):
    rep = validate(data(sample_params, v_en=compliant_v()), sample_params)
    assert rep.ok, rep.failed()


def test_axis_conditions(sample_params):
    # w_en = r^2 near the axis violates the vanishing derivatives there
    w = Profile("poly", amplitude=1e-3, power=2, r1=0.75, k=6)
    rep = validate(data(sample_params, w_en=w), sample_params)
    assert "axis:dr_w_en" in rep.failed()
    ok = Profile("poly", amplitude=1e-3, power=4, r1=0.75, k=6)
    assert validate(data(sample_params, w_en=ok), sample_params).ok


def test_interior_E_flag_only(sample_params):
    E = Profile("poly", amplitude=1e-3, power=2, r1=0.75, k=6)
    rep = validate(data(sample_params, E_en=E), sample_params)
    assert rep.ok
    assert rep["interior:dr_E_en"].flag_only and not rep["interior:dr_E_en"].passed


def test_validate_idempotent(sample_params):
    d = data(sample_params, v_en=compliant_v())
    a, b = validate(d, sample_params).as_dict(), validate(d, sample_params).as_dict()
    assert a == b


def test_validate_grid_too_coarse(sample_params):
    with pytest.raises(ShapeError):
        validate(data(sample_params), sample_params, n=8)


def test_sigma_examples(sample_params):
    p = sample_params
    bg = integrate_background(p, 0.2, 256)
    ref = background_reference(p, float(bg.E[-1]))
    zero = BoundaryData("disk", 0.25, {}, ref)
    assert sigma(zero, p, bg) == 0.0
    bconst = BoundaryData("disk", 0.25, {"b": Profile("constant", base=p.b0 + 1e-3)}, ref)
    assert sigma(bconst, p, bg) == pytest.approx(1e-3, abs=1e-15)
    S = Profile("poly", amplitude=1e-3, power=4, r1=0.75, k=6)
    one = BoundaryData("disk", 0.25, {"S_en": S}, ref)
    two = BoundaryData("disk", 0.25, {"S_en": S.scaled(2.0)}, ref)
    assert abs(sigma(two, p, bg) - 2 * sigma(one, p, bg)) <= 1e-12


def test_sigma_rejects_foreign_background(sample_params):
    bg = integrate_background(sample_params, 0.2, 256)
    with pytest.raises(ConfigError):
        sigma(data(sample_params), sample_params, bg)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-50.0, 50.0, allow_nan=False))
def test_sigma_homogeneous(sample_params, c):
    d = data(sample_params, v_en=compliant_v(), u_en=Profile("cosine", amplitude=1e-3, k=2.0),
             b=Profile("bump", amplitude=2e-3, r0=0.0, r1=0.5))
    s1 = sigma(d, sample_params)
    assert sigma(d.scaled(c), sample_params) == pytest.approx(abs(c) * s1, rel=1e-12, abs=1e-15)


def test_profile_csv(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("r,value\n0,0\n0.25,1\n0.5,2\n0.75,3\n1,4\n")
    r, v = read_profile_csv(f)
    np.testing.assert_array_equal(r, [0, 0.25, 0.5, 0.75, 1])
    f.write_text("r,value\n0,0\n0.5,1\n0.25,2\n0.75,3\n1,4\n")
    with pytest.raises(ConfigError) as ei:
        read_profile_csv(f)
    assert ei.value.info["line"] == 4


def test_unknown_family():
    with pytest.raises(ConfigError):
        Profile("spline")
