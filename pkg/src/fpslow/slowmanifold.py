"""Slow-manifold graph of the truncated linear system by Lyapunov-Perron iteration.

The system is written in sine coordinates for every component, where the
diffusion plus (mean) relaxation part Lambda is diagonal.  Slow coordinates
s are the sine modes k < k0 of a_0; every other coordinate is fast.  For a
linear system the graph is a matrix H with f = H s.

Each Lyapunov-Perron sweep takes the slow history s(t) = exp(S_k t) s(0) on
the current graph and evaluates

    f(0) = int_{-inf}^0 exp(-Lambda_f tau) (C_ff H_k + C_fs) exp(S_k tau) dtau s(0)

in closed form.  The integral X solves Lambda_f X - X S_k = -(C_ff H_k + C_fs),
which is done with a complex Schur form of the small matrix S_k.  The slow
generator is then refreshed, S_{k+1} = Lambda_s + C_ss + C_sf H_{k+1}.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import expm_multiply

from .coefsys import sine_mode
from .errors import GapConditionViolated, NoContraction, StepUnstable
from .splitting import estimate_lipschitz, sine_matrix, spectral_gap, _h2_gram

LP_TOL = 1e-8
MAX_ITER = 200


@dataclass
class SineSystem:
    """The truncated system in sine coordinates: d_t z = (diag(lam) + C) z."""
    lam: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    ny: int
    ncomp: int

    def to_sine(self, a):
        a = np.asarray(a, dtype=float).reshape(self.ncomp, self.ny)
        return (a @ self.Q).ravel()

    def to_grid(self, z):
        z = np.asarray(z).reshape(self.ncomp, self.ny, *np.shape(z)[1:])
        return np.einsum("mk,ck...->cm...", self.Q, z)


def sine_system(sys):
    ny, n = sys.ny, sys.J + 1
    Q = sine_matrix(ny)
    m = np.arange(1, ny + 1)
    mu = (4.0 / sys.dy ** 2) * np.sin(m * np.pi / (2 * (ny + 1))) ** 2
    D = 0.5 * sys.sigma2 ** 2
    lam_bar = sys.relax.mean(axis=1)
    lam = np.concatenate([-D * mu - lam_bar[j] for j in range(n)])
    C = np.zeros((n * ny, n * ny))
    Cp = sys.couple.toarray()
    for j in range(n):
        Cp[j * ny:(j + 1) * ny, j * ny:(j + 1) * ny] -= np.diag(sys.relax[j] - lam_bar[j])
    for j in range(n):
        for i in range(n):
            blk = Cp[j * ny:(j + 1) * ny, i * ny:(i + 1) * ny]
            if np.any(blk):
                C[j * ny:(j + 1) * ny, i * ny:(i + 1) * ny] = Q @ blk @ Q
    return SineSystem(lam, C, Q, ny, n)


def _indices(ss, split):
    ns = split.k0 - 1
    slow = np.arange(ns)
    fast = np.arange(ns, ss.lam.size)
    return slow, fast


def _sylvester_diag(lam_f, S, R):
    """Solve diag(lam_f) X - X S = R using a complex Schur form of S."""
    T, U = sla.schur(S.astype(complex), output="complex")
    RU = R @ U
    Y = np.zeros(RU.shape, dtype=complex)
    for c in range(T.shape[0]):
        rhs = RU[:, c] + Y[:, :c] @ T[:c, c]
        Y[:, c] = rhs / (lam_f - T[c, c])
    return (Y @ U.conj().T).real


@dataclass
class SlowManifoldGraph:
    H: np.ndarray                 # (n_fast, n_slow) in sine coordinates
    sine: SineSystem = field(repr=False)
    k0: int = 1
    iterate_count: int = 0
    contraction_estimate: float = float("nan")
    history: list = field(default_factory=list)
    gap: object = None

    @property
    def n_slow(self):
        return self.k0 - 1

    def slow_generator(self):
        ns = self.n_slow
        lam, C = self.sine.lam, self.sine.C
        return np.diag(lam[:ns]) + C[:ns, :ns] + C[:ns, ns:] @ self.H

    def fast_values(self, s):
        """Fast sine coordinates on the graph for slow coordinates ``s``."""
        return self.H @ np.asarray(s, dtype=float)

    def state(self, s):
        """Full grid state (J+1, ny) of the graph point over ``s``."""
        z = np.concatenate([np.asarray(s, dtype=float), self.fast_values(s)])
        return self.sine.to_grid(z)

    def h_fast_a0(self, s):
        st = self.state(s)
        a0s = self.sine.Q @ np.concatenate([s, np.zeros(self.sine.ny - self.n_slow)])
        return st[0] - a0s

    def h_aj(self, s):
        return self.state(s)[1:]

    def slow_coordinates(self, a0):
        return (np.asarray(a0, dtype=float) @ self.sine.Q)[:self.n_slow]


def lyapunov_perron(sys, split, lp_tol=LP_TOL, max_iter=MAX_ITER, require_gap=True,
                    gap=None):
    """Iterate the Lyapunov-Perron map to the graph matrix H.

    With ``require_gap`` the spectral-gap functional is evaluated first and
    :class:`GapConditionViolated` is raised when it is not below 1.
    :class:`NoContraction` is raised when the iterate distance grows for three
    consecutive sweeps.
    """
    if require_gap and gap is None:
        LF, LG = estimate_lipschitz(sys)
        lam = sys.relax[1:].mean(axis=1) * sys.epsilon
        gap = spectral_gap(sys.epsilon, split.zeta, split, lam, LF, LG)
    if require_gap and not gap.ok:
        raise GapConditionViolated(f"gap functional {gap.L_spec:.4f} >= 1")
    ss = sine_system(sys)
    slow, fast = _indices(ss, split)
    lam_s, lam_f = ss.lam[slow], ss.lam[fast]
    C = ss.C
    Css, Csf = C[np.ix_(slow, slow)], C[np.ix_(slow, fast)]
    Cfs, Cff = C[np.ix_(fast, slow)], C[np.ix_(fast, fast)]
    H = np.zeros((fast.size, slow.size))
    S = np.diag(lam_s) + Css
    hist = []
    grow = 0
    it = 0
    prev = None
    for it in range(1, max_iter + 1):
        Hn = _sylvester_diag(lam_f, S, -(Cff @ H + Cfs))
        diff = float(np.abs(Hn - H).max()) if H.size else 0.0
        H = Hn
        S = np.diag(lam_s) + Css + Csf @ H
        if prev is not None and prev > 0:
            ratio = diff / prev
            hist.append(ratio)
            grow = grow + 1 if ratio > 1 else 0
            if grow >= 3:
                raise NoContraction(f"iterate distance grew for 3 sweeps (ratio {ratio:.3g})")
        prev = diff
        if diff < lp_tol:
            break
    tail = [r for r in hist[-5:] if np.isfinite(r)]
    contraction = float(max(tail)) if tail else 0.0
    return SlowManifoldGraph(H, ss, split.k0, it, contraction, hist, gap)


def invariant_subspace_graph(sys, split):
    """Independent oracle: graph of the invariant subspace of the k0-1 slowest eigenvalues."""
    ss = sine_system(sys)
    M = np.diag(ss.lam) + ss.C
    ns = split.k0 - 1
    ev = sla.eigvals(M)
    order = np.sort(ev.real)[::-1]
    if ns >= order.size:
        raise ValueError("no fast coordinates")
    thr = 0.5 * (order[ns - 1] + order[ns])
    if not order[ns - 1] > order[ns]:
        raise ValueError("slow and fast spectra are not separated")
    T, Z, sdim = sla.schur(M, output="real", sort=lambda re, im: re > thr)
    if sdim != ns:
        raise ValueError(f"ordered Schur selected {sdim} eigenvalues, expected {ns}")
    Zs = Z[:ns, :ns]
    Zf = Z[ns:, :ns]
    H = np.linalg.solve(Zs.T, Zf.T).T
    return SlowManifoldGraph(H, ss, split.k0, 0, 0.0, [])


def manifold_distance(graph, sys):
    """Sup-norm distance of the graph from {a_j = 0, j >= 1} per unit H^2 slow input.

    Exact operator norm from slow coordinates (normed by the discrete H^2
    norm of the a_0 profile they describe) to the grid sup-norm of a_1..a_J.
    """
    ss = graph.sine
    ny, ns = ss.ny, graph.n_slow
    Qs = ss.Q[:, :ns]
    K = Qs.T @ _h2_gram(ny, sys.dy) @ Qs
    L = np.linalg.cholesky(K)
    rows = ss.to_grid(np.vstack([np.zeros((ns, ns)), graph.H]))[1:]   # (J, ny, ns)
    rows = rows.reshape(-1, ns)
    B = sla.solve_triangular(L, rows.T, lower=True).T   # rows @ L^{-T}
    return float(np.sqrt((B ** 2).sum(axis=1)).max())


def reduced_step(graph, s, dt):
    """IMEX step of the reduced slow dynamics: implicit diagonal part, explicit coupling."""
    ns = graph.n_slow
    lam = graph.sine.lam[:ns]
    explicit = graph.slow_generator() - np.diag(lam)
    new = (s + dt * (explicit @ s)) / (1.0 - dt * lam)
    if not np.all(np.isfinite(new)) or np.abs(new).max() > 1e12:
        raise StepUnstable("reduced dynamics blew up")
    return new


def reduced_integrate(graph, s0, T, dt):
    n = int(np.ceil(T / dt - 1e-12))
    dt = T / n
    s = np.asarray(s0, dtype=float).copy()
    out = [s.copy()]
    for _ in range(n):
        s = reduced_step(graph, s, dt)
        out.append(s.copy())
    return np.linspace(0.0, T, n + 1), np.array(out)


@dataclass
class DecayReport:
    times: np.ndarray
    distance: np.ndarray
    rate: float
    d0: float


def propagate_exact(sys, state0, times):
    """Exact solution of the semi-discrete system at ``times`` (uniformly spaced from 0)."""
    M = sys.operator().tocsc()
    z0 = np.asarray(state0, dtype=float).ravel()
    out = expm_multiply(M, z0, start=0.0, stop=times[-1], num=len(times), endpoint=True)
    return out.reshape(len(times), sys.J + 1, sys.ny)


def attraction_test(sys, graph, offset_scale, T, s0=None, n_times=201, fit_window=None):
    """Distance of a trajectory's fast part from the graph at its own slow modes.

    The start is the graph point over ``s0`` (default: unit first sine mode)
    plus ``offset_scale`` times the first sine mode added to every a_j,
    j >= 1.  The trajectory is propagated exactly.  The decay rate is fitted
    over ``fit_window`` (default 3 eps/lambda_1).
    """
    ss = graph.sine
    ns = graph.n_slow
    if s0 is None:
        s0 = np.zeros(ns)
        s0[0] = 1.0
    a = graph.state(s0)
    a[1:] += offset_scale * sine_mode(sys.y, 1, sys.R)
    times = np.linspace(0.0, T, n_times)
    traj = propagate_exact(sys, a, times)
    d = np.empty(n_times)
    for k, st in enumerate(traj):
        z = ss.to_sine(st)
        fast = z[ns:] - graph.H @ z[:ns]
        zf = np.concatenate([np.zeros(ns), fast])
        d[k] = float(np.abs(ss.to_grid(zf)).max())
    if fit_window is None:
        lam1 = float(sys.relax[1].mean()) if sys.J >= 1 else 1.0
        fit_window = 3.0 / lam1
    sel = (times <= fit_window) & (d > 0)
    rate = float("nan")
    if sel.sum() >= 3:
        rate = -float(np.polyfit(times[sel], np.log(d[sel]), 1)[0])
    return DecayReport(times, d, rate, float(d[0]))
