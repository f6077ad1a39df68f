import numpy as np
import pytest
from hypothesis import given, settings
from scipy.integrate import trapezoid
from hypothesis import strategies as st

from epcyl.errors import ConfigError, ShapeError
from epcyl.weighted_norms import (GridField, c0_norm, h_star_norm, hk_norm, m_star_norm,
                                  w_star_norm, weighted_top_term)


def square(f, n1=256, nc=17, L=1.0):
    x1 = np.linspace(0, L, n1)
    s = np.linspace(0, 1, nc)
    X1, X2, X3 = np.meshgrid(x1, s, s, indexing="ij")
    return GridField(f(X1, X2, X3), L, "square")


def test_constant_field():
    one = square(lambda a, b, c: np.ones_like(a))
    assert h_star_norm(one, 1) == pytest.approx(1.0, abs=1e-12)
    assert w_star_norm(one, 1) == pytest.approx(1.0, abs=1e-12)
    assert m_star_norm(one, 1) == pytest.approx(2.0, abs=1e-12)


def test_linear_field():
    f = square(lambda a, b, c: a)
    assert h_star_norm(f, 1) == pytest.approx(1 / np.sqrt(3) + 0.5, abs=1e-6)
    # j = 0: sup_s ||x1||_{L2(D)} = 1 ; j = 1: sup_d d^(1/2) ||1|| = sqrt(L) = 1
    assert w_star_norm(f, 1) == pytest.approx(2.0, abs=1e-10)
    assert m_star_norm(f, 1) == pytest.approx(1 / np.sqrt(3) + 0.5 + 2.0, abs=1e-6)


def test_axisym_constant():
    f = GridField(np.ones((65, 33)), 1.0, "axisym")
    assert hk_norm(f, 0) == pytest.approx(np.sqrt(np.pi), abs=1e-12)
    assert h_star_norm(f, 2) == pytest.approx(np.sqrt(np.pi), abs=1e-12)


def smooth(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=4)
    return lambda x, y, z: (a[0] * np.sin(2 * x + a[1]) * np.cos(np.pi * y)
                            + a[2] * x ** 2 * z + a[3] * np.exp(-y * z))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_homogeneity(k):
    f = square(smooth(k), n1=33, nc=13)
    for c in (-3.5, 0.25, 7.0):
        g = f.scaled(c)
        assert h_star_norm(g, k) == pytest.approx(abs(c) * h_star_norm(f, k), rel=1e-12)
        assert w_star_norm(g, k) == pytest.approx(abs(c) * w_star_norm(f, k), rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(s1=st.integers(0, 10 ** 6), s2=st.integers(0, 10 ** 6), k=st.integers(1, 3))
def test_triangle_inequality(s1, s2, k):
    f, g = square(smooth(s1), 25, 11), square(smooth(s2), 25, 11)
    fg = GridField(f.values + g.values, 1.0, "square")
    for norm in (h_star_norm, w_star_norm):
        assert norm(fg, k) <= norm(f, k) + norm(g, k) + 1e-10


def test_truncation_monotone():
    f = square(smooth(7), 65, 11)
    alphas = [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]
    dens = f.slice_integral(sum(f.deriv(a) ** 2 for a in alphas))
    # ||D^2 phi||^2 over Omega_{L-d} is nonincreasing in d
    part = [trapezoid(dens[: f.x1.size - m], f.x1[: f.x1.size - m]) for m in (0, 16, 32, 48)]
    assert all(a >= b for a, b in zip(part, part[1:]))
    assert weighted_top_term(f, 2) <= np.sqrt(f.L * f.volume_integral(
        sum(f.deriv(a) ** 2 for a in alphas))) + 1e-12


def test_embedding_constant_stable():
    ratios = []
    for n in (17, 33, 65):
        f = square(smooth(11), 2 * n - 1, n)
        ratios.append(c0_norm(f) / h_star_norm(f, 3))
    assert max(ratios) / min(ratios) < 1.1


def test_errors():
    f = square(lambda a, b, c: a, 17, 9)
    with pytest.raises(ConfigError):
        h_star_norm(f, 5)
    with pytest.raises(ConfigError):
        h_star_norm(f, 0)
    with pytest.raises(ShapeError):
        GridField(np.zeros((5, 9, 9)), 1.0)
    with pytest.raises(ShapeError):
        GridField(np.zeros((9, 9)), 1.0, "square")
    with pytest.raises(ConfigError):
        GridField(np.zeros((9, 9)), 1.0, "hexagon")
