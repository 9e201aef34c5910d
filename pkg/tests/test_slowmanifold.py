import numpy as np
import pytest
from hypothesis import given, strategies as st

from fpslow.config import load_config
from fpslow.errors import GapConditionViolated
from fpslow.harness import build_pipeline, manifold_point
from fpslow.slowmanifold import (attraction_test, invariant_subspace_graph, lyapunov_perron,
                                 manifold_distance, propagate_exact, reduced_integrate,
                                 sine_system)
from fpslow.reconstruct import slow_manifold_density
from fpslow.splitting import make_split

EPS = 1e-4


@pytest.fixture(scope="module")
def lp():
    cfg = load_config()
    info, g, p = manifold_point(cfg, EPS, 2, ny=201)
    return info, g, p


def test_gap_holds_and_k0(lp):
    info, g, _ = lp
    assert g.gap.ok
    assert info["k0"] == 100
    assert g.n_slow == 99


def test_matches_invariant_subspace_oracle(lp):
    _, g, p = lp
    split = make_split(EPS, 1.0, p.system.ny)
    ref = invariant_subspace_graph(p.system, split)
    assert np.abs(g.H - ref.H).max() <= 1e-7 * max(1.0, np.abs(ref.H).max())


def test_zero_and_linearity(lp):
    _, g, _ = lp
    assert np.all(g.state(np.zeros(g.n_slow))[1:] == 0)
    rng = np.random.default_rng(3)
    s, v = rng.normal(size=(2, g.n_slow))
    np.testing.assert_allclose(g.state(2.5 * s - v), 2.5 * g.state(s) - g.state(v), atol=1e-12)


def test_contraction_within_gap_bound(lp):
    _, g, _ = lp
    assert g.contraction_estimate <= g.gap.L_spec + 0.05


def test_invariance_under_exact_flow(lp):
    _, g, p = lp
    sys = p.system
    s0 = np.zeros(g.n_slow)
    s0[:3] = [1.0, -0.5, 0.25]
    times = np.linspace(0.0, 0.05, 6)
    tr = propagate_exact(sys, g.state(s0), times)
    ss = g.sine
    for st in tr:
        z = ss.to_sine(st)
        off = z[g.n_slow:] - g.H @ z[:g.n_slow]
        assert np.abs(off).max() <= 1e-7 * np.abs(z).max()


def test_reduced_dynamics_track_full_flow(lp):
    _, g, p = lp
    s0 = np.zeros(g.n_slow)
    s0[0] = 1.0
    T = 0.05
    t, s = reduced_integrate(g, s0, T, 1e-4)
    full = propagate_exact(p.system, g.state(s0), np.array([0.0, T]))[-1]
    z = g.sine.to_sine(full)
    assert np.abs(s[-1] - z[:g.n_slow]).max() <= 2e-3


def test_attraction_offset_scaling(lp):
    _, g, p = lp
    T = 3 * EPS
    r1 = attraction_test(p.system, g, 0.1, T)
    r2 = attraction_test(p.system, g, 0.2, T)
    assert r2.d0 == pytest.approx(2 * r1.d0, rel=1e-8)
    assert r2.rate == pytest.approx(r1.rate, rel=1e-6)
    assert r1.rate >= 0.5 / EPS
    r0 = attraction_test(p.system, g, 0.0, T)
    assert r0.distance.max() <= 1e-7


def test_gap_violation_raises():
    cfg = load_config()
    p = build_pipeline(cfg, 1e-2, 2, ny=39)
    split = make_split(1e-2, 1.0, 39)
    with pytest.raises(GapConditionViolated):
        lyapunov_perron(p.system, split)
    g = lyapunov_perron(p.system, split, require_gap=False)
    assert g.iterate_count >= 1


def test_distance_shrinks_with_eps():
    cfg = load_config()
    d = [manifold_point(cfg, e, 2)[0]["manifold_distance"] for e in (1e-4, 10 ** -4.5)]
    assert d[1] < 0.5 * d[0]


def test_sine_system_is_exact_change_of_basis():
    cfg = load_config()
    p = build_pipeline(cfg, 1e-2, 1, ny=31)
    ss = sine_system(p.system)
    M = p.system.operator().toarray()
    a = np.random.default_rng(0).normal(size=(2, 31))
    lhs = ss.to_sine((M @ a.ravel()))
    rhs = (np.diag(ss.lam) + ss.C) @ ss.to_sine(a)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * np.abs(lhs).max())
    np.testing.assert_allclose(ss.to_grid(ss.to_sine(a)), a, atol=1e-12)


def test_manifold_density_has_unit_structure(lp):
    _, g, p = lp
    x = np.linspace(-8, 8, 161)
    yf = p.disc.ygrid_full(p.model.R)
    s = np.zeros(g.n_slow)
    s[0] = 1.0
    f = slow_manifold_density(g, s, p.basis, x, yf)
    assert f.values.shape == (161, yf.size)
    assert np.all(f.values[:, [0, -1]] == 0)
