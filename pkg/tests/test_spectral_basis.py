import numpy as np
import pytest
from scipy.optimize import bisect
from scipy.special import j1

from epcyl import spectral_basis as sb
from epcyl.errors import ConfigError, ShapeError


@pytest.fixture(scope="module")
def disk():
    return sb.build("disk", 12)


@pytest.fixture(scope="module")
def rect():
    return sb.build("rectangle", 12)


def test_first_eigenvalues(disk, rect):
    assert rect.omega[1] == pytest.approx(np.pi ** 2, rel=1e-14)
    lam1 = bisect(j1, 3.0, 4.5, xtol=1e-14)
    assert lam1 == pytest.approx(3.8317060, abs=1e-7)
    assert disk.omega[1] == pytest.approx(lam1 ** 2, abs=1e-10)
    assert disk.omega[1] == pytest.approx(14.6819706, abs=1e-6)


@pytest.mark.parametrize("shape", ["disk", "rectangle"])
def test_constant_mode(shape):
    b = sb.build(shape, 6)
    assert b.omega[0] == 0.0
    assert np.ptp(b.eta[0]) < 1e-13
    assert np.sum(b.eta[0] ** 2 * b.weights) == pytest.approx(1.0, abs=1e-13)
    assert np.all(b.omega[1:] > 0) and np.all(np.diff(b.omega) >= 0)


@pytest.mark.parametrize("shape", ["disk", "rectangle"])
@pytest.mark.parametrize("K", [1, 8, 64])
def test_orthonormal(shape, K):
    b = sb.build(shape, K)
    G = (b.eta * b.weights) @ b.eta.T
    assert np.max(np.abs(G - np.eye(K))) <= 1e-10


def test_project_examples(disk, rect):
    for b in (disk, rect):
        e3 = sb.project(b, b.eta[3])
        np.testing.assert_allclose(e3, np.eye(b.n_modes)[3], atol=1e-10)
        assert np.all(sb.project(b, np.zeros(b.nq)) == 0.0)
        c = sb.project(b, 2 * b.eta[1] + 3 * b.eta[4])
        expect = np.zeros(b.n_modes)
        expect[[1, 4]] = 2.0, 3.0
        np.testing.assert_allclose(c, expect, atol=1e-10)


def test_round_trip(disk, rect):
    rng = np.random.default_rng(0)
    for b in (disk, rect):
        for c in (np.eye(b.n_modes)[3], np.zeros(b.n_modes), rng.normal(size=b.n_modes)):
            np.testing.assert_allclose(sb.project(b, sb.synthesize(b, c)), c, atol=1e-10)


def test_shape_errors(disk):
    with pytest.raises(ConfigError):
        sb.build("ellipse", 4)
    with pytest.raises(ConfigError):
        sb.build("disk", 0)
    with pytest.raises(ShapeError):
        sb.project(disk, np.zeros(disk.nq + 1))
    with pytest.raises(ShapeError):
        sb.synthesize(disk, np.zeros(disk.n_modes + 1))


def test_galerkin_laplacian(disk, rect):
    for b in (disk, rect):
        a = np.zeros((3, 3, b.nq))
        a[1, 1] = a[2, 2] = -1.0
        alpha, beta = sb.galerkin_matrices(b, a)
        assert np.max(np.abs(alpha)) == 0.0
        np.testing.assert_allclose(beta, np.diag(b.omega), atol=1e-9 * b.omega.max())
        alpha, beta = sb.galerkin_matrices(b, np.zeros((3, 3, b.nq)))
        assert not alpha.any() and not beta.any()


def _coef(x2, x3, C):
    # smooth symmetric coefficient field from a seed matrix of polynomial weights
    a = np.zeros((3, 3, x2.size))
    for i in range(3):
        for j in range(i, 3):
            c = C[i, j]
            a[i, j] = c[0] + c[1] * x2 + c[2] * x3 ** 2 + c[3] * x2 * x3
            a[j, i] = a[i, j]
    return a


def test_galerkin_dense_oracle(rect):
    C = np.random.default_rng(3).normal(size=(3, 3, 4))
    alpha, beta = sb.galerkin_matrices(rect, _coef(rect.x2, rect.x3, C))
    # independent 2D Gauss rule with many more points
    t, w = np.polynomial.legendre.leggauss(80)
    s, w = 0.5 * (t + 1), 0.5 * w
    X2, X3 = (g.ravel() for g in np.meshgrid(s, s, indexing="ij"))
    W = np.outer(w, w).ravel()
    md = rect.modes_at(X2, X3)
    a = _coef(X2, X3, C)
    ew = md["eta"] * W
    beta_o = (np.einsum("q,lq,kq->kl", a[1, 1], md["d22"], ew)
              + np.einsum("q,lq,kq->kl", a[2, 2], md["d33"], ew)
              + 2 * np.einsum("q,lq,kq->kl", a[1, 2], md["d23"], ew))
    alpha_o = 2 * (np.einsum("q,lq,kq->kl", a[0, 1], md["d2"], ew)
                   + np.einsum("q,lq,kq->kl", a[0, 2], md["d3"], ew))
    assert np.max(np.abs(beta - beta_o)) <= 1e-8
    assert np.max(np.abs(alpha - alpha_o)) <= 1e-8


def test_eigen_residual_disk(disk):
    for n in (201, 401):
        r = np.linspace(0, 1, n)
        h = r[1] - r[0]
        eta = disk.modes_at(r)["eta"]
        lap = (eta[:, 2:] - 2 * eta[:, 1:-1] + eta[:, :-2]) / h ** 2 \
            + (eta[:, 2:] - eta[:, :-2]) / (2 * h) / r[1:-1]
        res = np.max(np.abs(lap + disk.omega[:, None] * eta[:, 1:-1])[:6])
        assert res <= 2e4 * h ** 2
    # Neumann condition at the wall
    assert np.max(np.abs(disk.modes_at(1.0)["d2"])) < 1e-12


def test_eigen_residual_rect(rect):
    md = rect.modes_at(rect.x2, rect.x3)
    np.testing.assert_allclose(-(md["d22"] + md["d33"]), rect.omega[:, None] * md["eta"],
                               atol=1e-10 * rect.omega.max())


def test_parseval_truncation_decreases():
    r = np.linspace(0, 1, 513)
    f = lambda x: np.cos(3 * x ** 2) * (1 - x ** 2) ** 3  # noqa: E731
    errs = []
    for K in (2, 4, 8, 16):
        b = sb.build("disk", K, quad_order=200)
        c = sb.project(b, f(b.x2))
        errs.append(np.max(np.abs(c @ b.modes_at(r)["eta"] - f(r))))
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))


def test_dump_table(rect):
    t = rect.dump_table()
    assert t["index"][:3] == [0, 1, 2] and t["omega"][0] == 0.0
