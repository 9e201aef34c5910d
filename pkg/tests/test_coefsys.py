from functools import lru_cache

import numpy as np
import pytest
import sympy as sp_
from hypothesis import given, strategies as st

from fpslow.coefsys import (CoefficientState, assemble, dirichlet_laplacian, final_state,
                            h2_norm, integrate, l2_norm, sine_mode, step, with_boundary)
from fpslow.coupling import compute_coupling
from fpslow.eigenbasis import hermite_basis
from fpslow.errors import StepUnstable
from fpslow.model import Discretization, SdeModel, linear_ou_model

R = 2.0
EPS = 0.5


def ou_system(J, ny, eps=EPS, g="ou_linear"):
    m = SdeModel.from_strings("ou_linear", g, np.sqrt(2), np.sqrt(2), eps, R,
                              kind="OrnsteinUhlenbeck")
    d = Discretization(X=8.0, nx=401, ny=ny)
    b = hermite_basis(m, J)
    c = compute_coupling(b, m, d.ygrid_full(R), d, J)
    return assemble(c, m, d, J)


MODES = (1, 2, 3)  # a_j = sin(k_j pi (y + R)/(2R)) with k_j = MODES[j]


@lru_cache(maxsize=None)
def projected_generator(J):
    """Row projections of the full Fokker-Planck operator on sum_j a_j phi_j.

    Built symbolically: rho = sum a_j(y) phi_j(x, y), apply
    (1/eps) d_x((x - y) rho + d_x rho) + d_y(x rho) + d_yy rho,
    then integrate against psi_j = H_j((x - y)/sqrt 2) and divide by the norm.
    """
    x, y, u = sp_.symbols("x y u", real=True)
    z = (x - y) / sp_.sqrt(2)
    a = [sp_.sin(MODES[j] * sp_.pi * (y + R) / (2 * R)) for j in range(J + 1)]
    rho = sum(a[j] * sp_.exp(-z ** 2) * sp_.hermite(j, z) for j in range(J + 1))
    L = (sp_.diff((x - y) * rho + sp_.diff(rho, x), x) / EPS
         + sp_.diff(x * rho, y) + sp_.diff(rho, y, 2))
    out = []
    for j in range(J + 1):
        e = sp_.expand((L * sp_.hermite(j, z)).subs(x, u + y))
        val = sp_.integrate(e, (u, -sp_.oo, sp_.oo))
        norm = sp_.sqrt(2 * sp_.pi) * 2 ** j * sp_.factorial(j)
        out.append(sp_.lambdify(y, sp_.simplify(val / norm), "numpy"))
    return out


def apply_system(sys, J):
    a = np.array([sine_mode(sys.y, MODES[j], R) for j in range(J + 1)])
    return (sys.operator() @ a.ravel()).reshape(J + 1, -1)


def test_system_matches_symbolic_projection():
    J = 2
    ref = projected_generator(J)
    errs = []
    for ny in (99, 199):
        sys = ou_system(J, ny)
        got = apply_system(sys, J)
        exact = np.array([np.broadcast_to(ref[j](sys.y), sys.y.shape) for j in range(J + 1)])
        errs.append(np.abs(got - exact).max() / np.abs(exact).max())
    assert errs[1] < 2e-3
    # second-order consistency in dy
    assert errs[0] / errs[1] > 3.5


def test_a0_row_transport_for_linear_fixture():
    sys = ou_system(1, 31)
    yfull = np.linspace(-R, R, 33)
    np.testing.assert_allclose(sys.transport[0, 0], -yfull, atol=1e-10)
    np.testing.assert_allclose(sys.transport[1, 0], -np.sqrt(2.0), atol=1e-10)
    assert not np.any(sys.reaction[:, 0])
    assert np.all(sys.relax[0] == 0)
    np.testing.assert_allclose(sys.relax[1], 1.0 / EPS, rtol=1e-12)


def test_zero_state_is_fixed():
    sys = ou_system(2, 31)
    st0 = sys.zero_state()
    tr = integrate(sys, st0, 0.1, dt=1e-3)
    assert np.all(tr.l2 == 0)


def test_heat_decay_without_slow_drift():
    """g = 0 and J = 0: a_0 is a pure Dirichlet heat equation."""
    sys = ou_system(0, 63, g="0")
    k = 2
    a0 = sine_mode(sys.y, k, R)[None]
    mu = (4 / sys.dy ** 2) * np.sin(k * np.pi / (2 * (sys.ny + 1))) ** 2
    T, dt = 0.2, 1e-4
    out = final_state(sys, CoefficientState(0.0, a0), T, dt=dt)
    # backward Euler factor per step
    expect = a0 * (1.0 / (1.0 + dt * mu)) ** round(T / dt)
    np.testing.assert_allclose(out.a, expect, atol=1e-12)
    assert mu == pytest.approx((k * np.pi / (2 * R)) ** 2, rel=1e-2)


def test_fast_component_relaxes_at_lambda_over_eps():
    sys = ou_system(1, 63, eps=1e-2)
    a = np.zeros((2, sys.ny))
    a[1] = sine_mode(sys.y, 1, R)
    tr = integrate(sys, CoefficientState(0.0, a), 0.02, dt=2.5e-5)
    sel = tr.times <= 0.01
    rate = -np.polyfit(tr.times[sel], np.log(tr.l2[sel, 1]), 1)[0]
    assert rate == pytest.approx(100.0, rel=0.05)


@given(st.integers(0, 2 ** 32 - 1))
def test_step_is_linear(seed):
    sys = ou_system(2, 31)
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 3, sys.ny))
    c = rng.uniform(-2, 2)
    sa = step(sys, CoefficientState(0.0, a), 1e-3).a
    sb = step(sys, CoefficientState(0.0, b), 1e-3).a
    sab = step(sys, CoefficientState(0.0, c * a + b), 1e-3).a
    np.testing.assert_allclose(sab, c * sa + sb, atol=1e-10 * (np.abs(sab).max() + 1))


def test_blowup_raises():
    sys = ou_system(1, 31)
    big = CoefficientState(0.0, np.full((2, sys.ny), 1e13))
    with pytest.raises(StepUnstable):
        step(sys, big, 1e-4)


def test_integrate_bookkeeping():
    sys = ou_system(1, 31)
    a = np.zeros((2, sys.ny))
    a[0] = sine_mode(sys.y, 1, R)
    tr = integrate(sys, CoefficientState(0.0, a), 0.1, dt=0.003, stride=5, n_snapshots=4)
    n = int(np.ceil(0.1 / 0.003))
    assert tr.dt == pytest.approx(0.1 / n)
    assert tr.times[-1] == pytest.approx(0.1)
    assert len(tr.snapshots) == 5
    assert tr.snapshots[-1].t == pytest.approx(0.1)
    assert tr.l2.shape == tr.h2.shape == (len(tr.times), 2)
    with pytest.raises(ValueError):
        integrate(sys, CoefficientState(0.0, a), 0.0)


def test_norms():
    y = np.linspace(-R, R, 203)[1:-1]
    dy = y[1] - y[0]
    u = sine_mode(y, 1, R)
    assert l2_norm(u, dy) == pytest.approx(np.sqrt(R), rel=1e-4)
    k = np.pi / (2 * R)
    assert h2_norm(u, dy) == pytest.approx(np.sqrt(R * (1 + k ** 4)), rel=1e-3)
    assert with_boundary(u).shape == (203,)
    L = dirichlet_laplacian(201, dy)
    np.testing.assert_allclose(L @ u, -k ** 2 * u, rtol=1e-4)
