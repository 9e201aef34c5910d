import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fpslow.model import Discretization, SdeModel, linear_ou_model
from fpslow.reference import (FullFpeSolver, cosine_gaussian_density, cosine_gaussian_init,
                              euler_maruyama, histogram_density, solve_full_fpe)
from fpslow.reference.montecarlo import cell_edges, keyed_normals, keyed_uniforms, path_keys

R = 2.0


def gaussian_moments(eps, m0, S0, T, s1=np.sqrt(2), s2=np.sqrt(2)):
    """Mean and covariance of the linear fixture without boundaries."""
    A = np.array([[-1 / eps, 1 / eps], [-1.0, 0.0]])
    Q = np.diag([s1 ** 2 / eps, s2 ** 2])

    def rhs(_, v):
        m, S = v[:2], v[2:].reshape(2, 2)
        return np.concatenate([A @ m, (A @ S + S @ A.T + Q).ravel()])

    sol = solve_ivp(rhs, (0, T), np.concatenate([m0, np.ravel(S0)]), rtol=1e-11, atol=1e-13,
                    method="Radau")
    v = sol.y[:, -1]
    return v[:2], v[2:].reshape(2, 2)


def gaussian_density(x, y, m, S):
    Xg, Yg = np.meshgrid(x - m[0], y - m[1], indexing="ij")
    P = np.linalg.inv(S)
    q = P[0, 0] * Xg ** 2 + 2 * P[0, 1] * Xg * Yg + P[1, 1] * Yg ** 2
    return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(np.linalg.det(S)))


def test_full_solver_matches_gaussian_transition():
    eps = 0.1
    m = linear_ou_model(eps, R)
    d = Discretization(X=6.0, nx=241, ny=79)
    x, y = d.xgrid(), d.ygrid_full(R)
    m0, S0 = np.array([0.3, 0.0]), np.diag([0.5, 0.04])
    rho0 = gaussian_density(x, y, m0, S0)
    T = 0.05
    out = solve_full_fpe(m, d, rho0, T, dt=2.5e-4, richardson=True)
    mT, ST = gaussian_moments(eps, m0, S0, T)
    ref = gaussian_density(x, y, mT, ST)
    hx, hy = d.hx, y[1] - y[0]
    l1 = np.abs(out[-1].rho - ref).sum() * hx * hy
    assert l1 < 5e-3


def test_mass_non_increasing():
    m = linear_ou_model(1e-2, R)
    d = Discretization(X=8.0, nx=161, ny=39)
    x, y = d.xgrid(), d.ygrid_full(R)
    s = FullFpeSolver(m, d, 1e-3)
    out = s.run(cosine_gaussian_density(x, y, R), 0.2, n_snapshots=10)
    masses = [s.mass(o.rho) for o in out]
    assert np.all(np.diff(masses) <= 1e-12)
    assert masses[-1] < masses[0]


def test_cosine_gaussian_density_normalized():
    x = np.linspace(-10, 10, 2001)
    y = np.linspace(-R, R, 801)
    rho = cosine_gaussian_density(x, y, R)
    mass = np.trapezoid(np.trapezoid(rho, y, axis=1), x)
    assert mass == pytest.approx(1.0, abs=1e-5)


def test_mc_determinism_and_chunk_independence():
    m = linear_ou_model(1e-2, R)
    init = cosine_gaussian_init(R)
    a = euler_maruyama(m, 3000, 0.05, 1e-3, 7, init)
    b = euler_maruyama(m, 3000, 0.05, 1e-3, 7, init, chunk=700)
    c = euler_maruyama(m, 3000, 0.05, 1e-3, 8, init)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.x, c.x)


def test_keyed_streams():
    keys = path_keys(1, np.arange(10000, dtype=np.uint64))
    u = keyed_uniforms(keys, 5)
    z = keyed_normals(keys, 6)
    assert 0 < u.min() and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.02
    assert abs(z.mean()) < 0.05 and abs(z.std() - 1) < 0.05
    np.testing.assert_array_equal(z, keyed_normals(keys, 6))
    assert abs(np.corrcoef(keyed_normals(keys, 7), z)[0, 1]) < 0.05


def test_mc_near_deterministic_matches_ode():
    eps = 0.1
    tiny = 1e-9
    m = SdeModel.from_strings("ou_linear", "ou_linear", tiny, tiny, eps, R, kind="OrnsteinUhlenbeck")

    def init(keys):
        n = keys.size
        return np.full(n, 1.0), np.full(n, 0.5)

    T, dt = 0.3, 1e-4
    ens = euler_maruyama(m, 4, T, dt, 0, init)
    sol = solve_ivp(lambda _, v: [(v[1] - v[0]) / eps, -v[0]], (0, T), [1.0, 0.5],
                    rtol=1e-12, atol=1e-12)
    assert ens.x[0] == pytest.approx(sol.y[0, -1], abs=5e-4)
    assert ens.y[0] == pytest.approx(sol.y[1, -1], abs=5e-4)


def test_mc_moments_match_gaussian_oracle():
    eps = 0.05
    m = linear_ou_model(eps, R)
    m0, S0 = np.array([0.2, -0.1]), np.diag([0.3, 0.02])
    L = np.linalg.cholesky(S0)

    def init(keys):
        z = np.vstack([keyed_normals(keys, 0), keyed_normals(keys, 1)])
        v = m0[:, None] + L @ z
        return v[0], v[1]

    T = 0.05
    n = 40000
    ens = euler_maruyama(m, n, T, eps / 50, 11, init)
    mT, ST = gaussian_moments(eps, m0, S0, T)
    assert ens.absorbed == 0
    for k, v in enumerate((ens.x, ens.y)):
        se = np.sqrt(ST[k, k] / n)
        assert abs(v.mean() - mT[k]) < 4 * se + 0.01 * np.sqrt(ST[k, k])
        assert v.var() == pytest.approx(ST[k, k], rel=0.05)


def test_histogram_density_normalization():
    m = linear_ou_model(1e-2, R)
    xn = np.linspace(-6, 6, 25)
    yn = np.linspace(-R, R, 17)
    ens = euler_maruyama(m, 5000, 0.02, 1e-3, 3, cosine_gaussian_init(R), snapshot_times=[0.02],
                         x_nodes=xn, y_nodes=yn)
    t, counts = ens.histograms[0]
    assert t == 0.02
    dens = histogram_density(ens, counts)
    area = np.outer(np.diff(ens.x_edges), np.diff(ens.y_edges))
    assert (dens * area).sum() == pytest.approx(counts.sum() / 5000)
    e = cell_edges(yn)
    assert e.size == yn.size + 1 and e[0] < -R < e[1]


def test_dt_limit():
    m = linear_ou_model(1e-2, R)
    with pytest.raises(ValueError):
        euler_maruyama(m, 10, 0.1, 2e-3, 0, cosine_gaussian_init(R))
