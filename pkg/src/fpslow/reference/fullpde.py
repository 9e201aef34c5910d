"""Full Fokker-Planck solver on [-X, X] x [-R, R].

    d_t rho = (1/eps) L1 rho - d_y(g rho) + (sigma2^2/2) d_yy rho

The x operator (exponentially fitted, zero flux at +-X) and the y diffusion
(Dirichlet at +-R) are implicit and applied as two dimension-split sweeps of
independent tridiagonal systems.  The y transport is explicit and
conservative.  An optional Richardson pass combines steps dt and dt/2 into
a second-order-in-time result.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..coefsys import dirichlet_laplacian
from ..errors import GridMismatch, MassAnomaly, StepUnstable
from ..reconstruct import DensityField, density_error, marginal, reconstruct_density
from ..stationary import fast_operator, log_potential, trapezoid_weights

BLOWUP_CAP = 1e12


@dataclass(frozen=True)
class FullFpeState:
    t: float
    rho: np.ndarray   # (nx, ny + 2), zero in the first and last columns

    def field(self, x, y):
        return DensityField(self.t, x, y, self.rho)


class FullFpeSolver:
    def __init__(self, model, disc, dt):
        self.model = model
        self.disc = disc
        self.dt = float(dt)
        self.x = disc.xgrid()
        self.y = disc.ygrid_full(model.R)
        self.hx = disc.hx
        self.dy = self.y[1] - self.y[0]
        self.wx = trapezoid_weights(self.x.size, self.hx)
        nx, ny = self.x.size, self.y.size - 2
        D1 = 0.5 * model.sigma1 ** 2
        D2 = 0.5 * model.sigma2 ** 2
        blocks = [fast_operator(log_potential(model, yk, self.x), self.hx, D1)
                  for yk in self.y[1:-1]]
        self.Lx = sp.block_diag(blocks, format="csc") / model.epsilon
        self.Ly = sp.block_diag([D2 * dirichlet_laplacian(ny, self.dy)] * nx, format="csc")
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        g = np.asarray(model.g(X, Y), dtype=float) * np.ones_like(X)
        self.gface = 0.5 * (g[:, :-1] + g[:, 1:])   # (nx, ny + 1)
        self._lu = {}

    def _solvers(self, dt):
        if dt not in self._lu:
            Ix = sp.identity(self.Lx.shape[0], format="csc")
            Iy = sp.identity(self.Ly.shape[0], format="csc")
            self._lu[dt] = (splu((Ix - dt * self.Lx).tocsc()), splu((Iy - dt * self.Ly).tocsc()))
        return self._lu[dt]

    def transport(self, rho):
        """-d_y(g rho) at interior nodes, conservative centered fluxes."""
        F = self.gface * 0.5 * (rho[:, :-1] + rho[:, 1:])
        out = np.zeros_like(rho)
        out[:, 1:-1] = -(F[:, 1:] - F[:, :-1]) / self.dy
        return out

    def mass(self, rho):
        return float(self.wx @ rho[:, 1:-1].sum(axis=1) * self.dy)

    def step(self, rho, dt):
        lux, luy = self._solvers(dt)
        nx, ny = self.x.size, self.y.size - 2
        r = rho + dt * self.transport(rho)
        inner = r[:, 1:-1]
        v = lux.solve(np.ascontiguousarray(inner.T).ravel()).reshape(ny, nx).T
        v = luy.solve(np.ascontiguousarray(v).ravel()).reshape(nx, ny)
        out = np.zeros_like(rho)
        out[:, 1:-1] = v
        if not np.all(np.isfinite(out)) or np.abs(out).max() > BLOWUP_CAP:
            raise StepUnstable("full solver blew up")
        return out

    def run(self, rho0, T, n_snapshots=1, richardson=False, check_mass=True):
        nsteps = int(np.ceil(T / self.dt - 1e-12))
        dt = T / nsteps
        rho = np.array(rho0, dtype=float, copy=True)
        rho[:, 0] = rho[:, -1] = 0.0
        snap_at = {int(round(k * nsteps / n_snapshots)) for k in range(1, n_snapshots + 1)}
        out = [FullFpeState(0.0, rho.copy())]
        half = rho.copy() if richardson else None
        m_prev = self.mass(rho)
        for k in range(1, nsteps + 1):
            rho = self.step(rho, dt)
            if richardson:
                half = self.step(self.step(half, 0.5 * dt), 0.5 * dt)
            if check_mass:
                m = self.mass(half if richardson else rho)
                if m > m_prev + 1e-8:
                    raise MassAnomaly(f"mass rose from {m_prev!r} to {m!r} at step {k}")
                m_prev = m
            if k in snap_at:
                val = 2.0 * half - rho if richardson else rho
                out.append(FullFpeState(k * dt, val.copy()))
        return out


def solve_full_fpe(model, disc, rho0, T, dt=None, n_snapshots=1, richardson=False):
    """Trajectory of the full equation; returns the initial state plus snapshots."""
    if dt is None:
        dt = disc.dt if disc.dt is not None else 0.01 * model.epsilon
    return FullFpeSolver(model, disc, dt).run(rho0, T, n_snapshots, richardson)


def compare_reduction(full_states, coef_states, basis, x, yfull):
    """Per-snapshot errors between the full solution and the reconstructed truncation.

    Returns rows (t, L1, L2, Linf, marginal_L2); the marginal error compares
    int rho dx with the reconstructed marginal.
    """
    if len(full_states) != len(coef_states):
        raise GridMismatch("snapshot counts differ")
    rows = []
    dy = yfull[1] - yfull[0]
    for fs, cs in zip(full_states, coef_states):
        if abs(fs.t - cs.t) > 1e-9 * max(1.0, abs(fs.t)):
            raise GridMismatch(f"snapshot times differ: {fs.t} vs {cs.t}")
        rec = reconstruct_density(cs, basis, x, yfull)
        full = fs.field(x, yfull)
        L1, L2, Linf = density_error(full, rec)
        dm = marginal(full) - marginal(rec)
        rows.append((fs.t, L1, L2, Linf, float(np.sqrt(dy * np.sum(dm ** 2)))))
    return rows
