"""Truncated coefficient system on y in (-R, R) with Dirichlet conditions.

Row j of the system reads

    d_t a_j = (sigma2^2/2) a_j'' - (lambda_j/eps) a_j
              + (1/N_j) sum_i [ -d_y(T_ij a_i) + S_ij a_i ],

with transport T_ij = Gkj + sigma2^2 Dkj and reaction
S_ij = Gtil + (sigma2^2/2) Dtil taken from the coupling tensors.  Row 0
always uses T_i0 = G_i and S_i0 = 0 with N_0 = C0.  Components above J are
dropped.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import StepUnstable

BLOWUP_CAP = 1e12


def sine_mode(y, k, R):
    """Dirichlet eigenfunction sin(k pi (y + R)/(2R)) on (-R, R)."""
    return np.sin(k * np.pi * (np.asarray(y, dtype=float) + R) / (2.0 * R))


def with_boundary(a):
    """Pad interior values with the Dirichlet zeros along the last axis."""
    a = np.asarray(a, dtype=float)
    pad = [(0, 0)] * (a.ndim - 1) + [(1, 1)]
    return np.pad(a, pad)


def l2_norm(a, dy):
    return float(np.sqrt(dy * np.sum(np.asarray(a) ** 2)))


def second_difference(a, dy):
    """D+D- on the full grid (Dirichlet zeros included) with one-sided end closures."""
    u = with_boundary(a)
    d2 = np.empty_like(u)
    d2[1:-1] = (u[:-2] - 2 * u[1:-1] + u[2:]) / dy ** 2
    d2[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / dy ** 2
    d2[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / dy ** 2
    return d2


def h2_norm(a, dy):
    """Discrete H^2 norm sqrt(|u|^2 + |D+D- u|^2), trapezoid weights."""
    d2 = second_difference(a, dy)
    w = np.full(d2.size, dy)
    w[0] = w[-1] = 0.5 * dy
    return float(np.sqrt(dy * np.sum(np.asarray(a) ** 2) + np.sum(w * d2 ** 2)))


def dirichlet_laplacian(ny, dy):
    main = np.full(ny, -2.0 / dy ** 2)
    off = np.full(ny - 1, 1.0 / dy ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def conservative_derivative(T, ny, dy):
    """Matrix of a -> d_y(T a) with face values averaged from node samples.

    ``T`` holds samples on the full grid (ny + 2 nodes, endpoints included).
    """
    Tf = 0.5 * (T[:-1] + T[1:])            # faces 1/2 .. ny+1/2
    # (F_{k+1/2} - F_{k-1/2})/dy with F = Tf (a_k + a_{k+1})/2
    diag = 0.5 * (Tf[1:] - Tf[:-1]) / dy
    upper = 0.5 * Tf[1:-1] / dy
    lower = -0.5 * Tf[1:-1] / dy
    return sp.diags([lower, diag, upper], [-1, 0, 1], shape=(ny, ny), format="csr")


@dataclass
class CoefficientState:
    t: float
    a: np.ndarray  # (J+1, ny) interior values

    def copy(self):
        return CoefficientState(self.t, self.a.copy())

    def full(self):
        return with_boundary(self.a)


@dataclass
class TruncatedSystem:
    J: int
    epsilon: float
    sigma2: float
    R: float
    y: np.ndarray            # interior nodes
    dy: float
    relax: np.ndarray        # (J+1, ny) lambda_j(y)/eps, zero in row 0
    L_diff: sp.csr_matrix    # (sigma2^2/2) Laplacian, one component
    couple: sp.csr_matrix    # ((J+1) ny)^2
    transport: np.ndarray    # (J+1, J+1, ny+2) normalized T_ij
    reaction: np.ndarray     # (J+1, J+1, ny+2) normalized S_ij
    tensors: object = field(default=None, repr=False)
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def ny(self):
        return self.y.size

    @property
    def size(self):
        return (self.J + 1) * self.ny

    def implicit_block(self):
        blocks = [self.L_diff - sp.diags(self.relax[j]) for j in range(self.J + 1)]
        return sp.block_diag(blocks, format="csr")

    def operator(self):
        """Full semi-discrete generator M with d_t a = M a (flattened row-major)."""
        return (self.implicit_block() + self.couple).tocsr()

    def default_dt(self):
        tf = 0.5 * (self.transport[..., :-1] + self.transport[..., 1:])
        tmax = float(np.abs(tf).max()) if tf.size else 0.0
        dt = 0.1 * self.epsilon
        if tmax > 0:
            dt = min(dt, 0.25 * self.dy / tmax)
        return dt

    def _solver(self, dt):
        key = float(dt)
        if key not in self._lu:
            A = sp.identity(self.size, format="csc") - dt * self.implicit_block().tocsc()
            self._lu[key] = splu(A.tocsc())
        return self._lu[key]

    def zero_state(self):
        return CoefficientState(0.0, np.zeros((self.J + 1, self.ny)))


def assemble(coupling, model, disc=None, J=None):
    """Build the truncated system from coupling tensors sampled on the full y grid."""
    if J is None:
        J = coupling.J
    yfull = coupling.y
    ny = yfull.size - 2
    dy = yfull[1] - yfull[0]
    s2 = model.sigma2 ** 2
    n = J + 1
    T = np.zeros((n, n, ny + 2))
    S = np.zeros((n, n, ny + 2))
    for j in range(n):
        for i in range(n):
            if j == 0:
                T[i, 0] = coupling.G[i] / coupling.C0
                continue
            T[i, j] = (coupling.Gkj[i, j] + s2 * coupling.Dkj[i, j]) / coupling.norms[j]
            S[i, j] = (coupling.Gtil[i, j] + 0.5 * s2 * coupling.Dtil[i, j]) / coupling.norms[j]
    rows = []
    for j in range(n):
        row = []
        for i in range(n):
            blk = None
            if np.any(T[i, j]):
                blk = -conservative_derivative(T[i, j], ny, dy)
            if np.any(S[i, j]):
                r = sp.diags(S[i, j, 1:-1])
                blk = r if blk is None else blk + r
            row.append(blk)
        rows.append(row)
    couple = sp.bmat(rows, format="csr") if any(b is not None for r in rows for b in r) \
        else sp.csr_matrix((n * ny, n * ny))
    if couple.shape != (n * ny, n * ny):
        couple = sp.csr_matrix((n * ny, n * ny))
    relax = coupling.lambdas[:n, 1:-1] / model.epsilon
    relax = relax.copy()
    relax[0] = 0.0
    L = 0.5 * s2 * dirichlet_laplacian(ny, dy)
    return TruncatedSystem(J, model.epsilon, model.sigma2, model.R, yfull[1:-1].copy(), dy,
                           relax, L, couple, T, S, coupling)


def step(sys, state, dt):
    """One IMEX step: implicit diffusion and relaxation, explicit coupling."""
    a = state.a.ravel()
    rhs = a + dt * (sys.couple @ a)
    new = sys._solver(dt).solve(rhs)
    if not np.all(np.isfinite(new)) or np.abs(new).max() > BLOWUP_CAP:
        raise StepUnstable(f"coefficient values exceed {BLOWUP_CAP:g} at t={state.t + dt:g}")
    return CoefficientState(state.t + dt, new.reshape(state.a.shape))


@dataclass
class Trajectory:
    times: np.ndarray
    l2: np.ndarray        # (nt, J+1)
    h2: np.ndarray        # (nt, J+1)
    snapshots: list
    dt: float


def integrate(sys, state0, T, dt=None, observer=None, stride=1, n_snapshots=0):
    """March ``state0`` to time ``t0 + T`` with a fixed step.

    The step is shrunk so that an integer number of steps lands on ``T``.
    Norms are recorded every ``stride`` steps; ``n_snapshots`` evenly spaced
    full states (plus the initial one) are kept.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if dt is None:
        dt = sys.default_dt()
    nsteps = int(np.ceil(T / dt - 1e-12))
    dt = T / nsteps
    snap_at = set()
    if n_snapshots > 0:
        snap_at = {int(round(k * nsteps / n_snapshots)) for k in range(1, n_snapshots + 1)}
    state = state0.copy()
    times, l2, h2 = [], [], []
    snaps = [state.copy()] if n_snapshots > 0 else []

    def record(st):
        times.append(st.t)
        l2.append([l2_norm(r, sys.dy) for r in st.a])
        h2.append([h2_norm(r, sys.dy) for r in st.a])
        if observer is not None:
            observer(st)

    record(state)
    for k in range(1, nsteps + 1):
        state = step(sys, state, dt)
        if k % stride == 0 or k == nsteps:
            record(state)
        if k in snap_at:
            snaps.append(state.copy())
    return Trajectory(np.array(times), np.array(l2), np.array(h2), snaps, dt)


def final_state(sys, state0, T, dt=None):
    """Only the terminal state, without per-step norm bookkeeping."""
    if dt is None:
        dt = sys.default_dt()
    nsteps = int(np.ceil(T / dt - 1e-12))
    dt = T / nsteps
    state = state0.copy()
    for _ in range(nsteps):
        state = step(sys, state, dt)
    return state
