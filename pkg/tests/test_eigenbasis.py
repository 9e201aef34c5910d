import numpy as np
import pytest
from hypothesis import given, strategies as st

from fpslow.eigenbasis import hermite, hermite_basis, make_basis, numeric_basis, HERMITE, NUMERIC
from fpslow.errors import UnsupportedModel
from fpslow.model import Discretization, SdeModel
from fpslow.stationary import fast_operator, log_potential, stationary_density

from conftest import cubic_model


def test_hermite_eigenvalues(ou):
    b = hermite_basis(ou, 5)
    np.testing.assert_allclose(b.lambdas[:4], [0, 1, 2, 3], atol=1e-14)
    assert b.C0 == pytest.approx(np.sqrt(2 * np.pi))
    assert b.source == HERMITE


def test_hermite_plain_norm_quadrature(ou):
    """Plain L2 norm of phi_1 from 200-node Gauss-Hermite vs the stored value."""
    b = hermite_basis(ou, 3)
    t, w = np.polynomial.hermite.hermgauss(200)
    # phi_1^2 = exp(-t^2) H_1(t/sqrt2)^2 with x - y = t
    val = (w * hermite(1, t / np.sqrt(2)) ** 2).sum()
    assert b.norms[1] == pytest.approx(val, rel=1e-10)
    assert b.norms[1] == pytest.approx(np.sqrt(np.pi), rel=1e-12)


def test_dual_biorthogonality(ou):
    b = hermite_basis(ou, 6)
    x = np.linspace(-14, 14, 8001)
    w = np.full(x.size, x[1] - x[0])
    w[[0, -1]] *= 0.5
    G = np.array([[w @ (b.eval(i, 0.3, x) * b.dual(j, 0.3, x)) for j in range(7)]
                  for i in range(7)])
    np.testing.assert_allclose(G, np.diag(b.dual_norms[:7]), atol=1e-8 * b.dual_norms[6])


@given(st.lists(st.floats(-6, 6), min_size=64, max_size=64))
def test_hermite_derivative_recurrence(zs):
    z = np.array(zs)
    for n in range(6):
        h = 1e-6
        f = lambda u: hermite(n, u) * np.exp(-u * u)
        d = (f(z + h) - f(z - h)) / (2 * h)
        np.testing.assert_allclose(d, -hermite(n + 1, z) * np.exp(-z * z), atol=1e-6 * 2.0 ** n)


@given(st.integers(0, 5), st.floats(-1.9, 1.9))
def test_translation_structure(j, y):
    b = hermite_basis(SdeModel.from_strings("ou_linear", "ou_linear", np.sqrt(2), np.sqrt(2),
                                            0.01, 2.0, kind="OrnsteinUhlenbeck"), 5)
    x = np.linspace(-6, 6, 97)
    np.testing.assert_allclose(b.eval(j, y, x), b.eval(j, 0.0, x - y), rtol=1e-13, atol=1e-13)


def test_hermite_eigen_residual(ou):
    """Residual of the discrete generator on analytic eigenfunctions, fine grid."""
    d = Discretization(X=10.0, nx=4001, ny=19)
    x = d.xgrid()
    b = hermite_basis(ou, 4)
    L1 = fast_operator(log_potential(ou, 0.2, x), d.hx, 1.0)
    for j in range(5):
        phi = b.eval(j, 0.2, x)
        r = L1 @ phi + b.lambdas[j] * phi
        assert np.linalg.norm(r) <= 1e-3 * np.linalg.norm(phi) * (j + 1)


def test_hermite_requires_ou():
    with pytest.raises(UnsupportedModel):
        hermite_basis(cubic_model(), 3)


def test_numeric_basis_linear(ou):
    d = Discretization(X=8.0, nx=801, ny=19)
    b = numeric_basis(ou, d, 5)
    np.testing.assert_allclose(b.lambdas[:6], np.arange(6), atol=1e-3)
    s = b.node(0.0)
    w = b.w
    gram = (w * s.chi[:6]) @ s.chi[:6].T
    assert np.abs(gram - np.eye(6)).max() <= 1e-6
    ps = stationary_density(ou, 0.0, d)
    phi0 = b.eval(0, 0.0, d.xgrid())
    assert np.linalg.norm(phi0 - ps.values) <= 1e-6 * np.linalg.norm(ps.values)
    assert b.source == NUMERIC


def test_numeric_kernel_and_zero_mean(ou):
    d = Discretization(X=8.0, nx=801, ny=19)
    b = numeric_basis(ou, d, 4)
    x = d.xgrid()
    L1 = fast_operator(log_potential(ou, 0.5, x), d.hx, 1.0)
    phi0 = b.eval(0, 0.5, x)
    assert np.abs(L1 @ phi0).max() <= 1e-8
    for j in range(1, 5):
        phi = b.eval(j, 0.5, x)
        assert abs(b.w @ phi) <= 1e-8
        r = L1 @ phi + b.node(0.5).lambdas[j] * phi
        assert np.linalg.norm(r) <= 1e-6 * np.linalg.norm(phi)


def test_numeric_eigenvalue_convergence(ou):
    err = []
    for nx in (201, 401):
        b = numeric_basis(ou, Discretization(X=8.0, nx=nx, ny=19), 4)
        err.append(np.abs(b.lambdas[1:5] - np.arange(1, 5)))
    assert np.all(err[1] * 3 <= err[0])


def test_numeric_cubic_positive_gap():
    m = cubic_model()
    b = numeric_basis(m, Discretization(X=6.0, nx=601, ny=19), 3)
    s = b.node(0.3)
    assert s.lambdas[0] == 0 and s.lambdas[1] > 0.5
    assert np.all(np.diff(s.lambdas) > 0)


def test_sign_convention_continuity(ou):
    d = Discretization(X=8.0, nx=401, ny=19)
    b = numeric_basis(ou, d, 3)
    x = d.xgrid()
    for j in range(4):
        a = b.eval(j, 0.3, x)
        c = b.eval(j, 0.3 + 1e-3, x)
        assert np.linalg.norm(a - c) < 0.05 * np.linalg.norm(a)


def test_numeric_eval_dy_matches_hermite(ou):
    d = Discretization(X=8.0, nx=1601, ny=19)
    nb = numeric_basis(ou, d, 3)
    hb = hermite_basis(ou, 3)
    x = d.xgrid()
    for j in range(4):
        # numeric phi_j = hermite phi_j * c_j for a y-independent constant c_j
        hn = hb.eval(j, 0.2, x)
        c = (nb.w @ (nb.eval(j, 0.2, x) * hn)) / (nb.w @ (hn * hn))
        np.testing.assert_allclose(nb.eval_dy(j, 0.2, x), c * hb.eval_dy(j, 0.2, x),
                                   atol=2e-4 * np.abs(c * hb.eval_dy(j, 0.2, x)).max())


def test_make_basis_paths(ou, disc):
    assert make_basis(ou, disc, 2).source == HERMITE
    assert make_basis(ou, disc, 2, path="numeric").source == NUMERIC
    assert make_basis(cubic_model(), Discretization(X=6.0, nx=201, ny=19), 2).source == NUMERIC
