"""Stationary density of the fast operator and the projections P, Q.

The fast operator is L1 u = d/dx((sigma1^2/2) u' - f u) on [-X, X] with
zero flux at both ends.  Its kernel is p_s = c exp(Psi) where
Psi' = 2 f / sigma1^2.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import TailMassExceeded

TAIL_TOL = 1e-10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def log_potential(model, y, x):
    """Psi(x) = int_0^x 2 f(s, y)/sigma1^2 ds on a uniform grid.

    Each cell is integrated with 8-point Gauss-Legendre, so polynomial drifts
    are integrated exactly and smooth ones to near rounding.
    """
    x = np.asarray(x, dtype=float)
    c = 2.0 / model.sigma1 ** 2
    mid = 0.5 * (x[1:] + x[:-1])
    half = 0.5 * (x[1:] - x[:-1])
    s = mid[:, None] + half[:, None] * _GL_X[None, :]
    cells = c * (np.asarray(model.f(s, y), dtype=float) * _GL_W).sum(axis=1) * half
    psi = np.concatenate([[0.0], np.cumsum(cells)])
    k = int(np.argmin(np.abs(x)))
    # shift the anchor from x[k] to 0
    xm, hm = 0.5 * x[k], 0.5 * x[k]
    to_zero = -c * float((np.asarray(model.f(xm + hm * _GL_X, y), dtype=float) * _GL_W).sum() * hm)
    return psi - psi[k] - to_zero


@dataclass(frozen=True)
class StationaryDensity:
    y_param: float
    x: np.ndarray
    values: np.ndarray
    normalizer: float
    log_normalizer: float
    Psi: np.ndarray

    @property
    def h(self):
        return self.x[1] - self.x[0]

    @property
    def weights(self):
        return trapezoid_weights(self.x.size, self.h)


def stationary_density(model, y, disc, tail_tol=TAIL_TOL):
    """Normalized kernel of the fast operator with the slow variable frozen at ``y``."""
    x = disc.xgrid()
    psi = log_potential(model, y, x)
    w = trapezoid_weights(x.size, disc.hx)
    top = psi.max()
    un = np.exp(psi - top)
    Z = float(w @ un)
    values = un / Z
    log_c = -top - np.log(Z)
    outer = np.abs(x) > 0.95 * disc.X
    tail = float(w[outer] @ values[outer])
    if tail > tail_tol:
        raise TailMassExceeded(
            f"mass {tail:.3e} in the outer 5% of [-X, X] at y={y}; increase X")
    return StationaryDensity(float(y), x, values, float(np.exp(log_c)), float(log_c), psi)


@dataclass(frozen=True)
class ProjectionPair:
    """P u = p_s * int u dx (trapezoid) and Q = I - P."""
    ps: np.ndarray
    weights: np.ndarray

    def P(self, u):
        return self.ps * (self.weights @ u)

    def Q(self, u):
        return u - self.P(u)

    def P_matrix(self):
        return np.outer(self.ps, self.weights)

    def Q_matrix(self):
        return np.eye(self.ps.size) - self.P_matrix()


def build_projections(ps, disc=None):
    return ProjectionPair(ps.values, ps.weights)


def fast_operator(Psi, h, D):
    """Sparse matrix of L1 acting on densities, exponentially fitted fluxes.

    The flux between nodes i and i+1 is
    F = (D/h) (exp(-dPsi/2) u_{i+1} - exp(dPsi/2) u_i), which vanishes on
    u = exp(Psi), and the zero-flux ends make the trapezoid sum of L1 u vanish
    identically.
    """
    n = Psi.size
    w = trapezoid_weights(n, h)
    dpsi = np.diff(Psi)
    up = (D / h) * np.exp(-0.5 * dpsi)   # coefficient of u_{i+1} in F_{i+1/2}
    lo = (D / h) * np.exp(0.5 * dpsi)    # coefficient of u_i in F_{i+1/2}
    diag = np.zeros(n)
    diag[:-1] -= lo
    diag[1:] -= up
    A = sp.diags([lo, diag, up], [-1, 0, 1], shape=(n, n), format="csr")
    return sp.diags(1.0 / w) @ A


def symmetric_fast_operator(Psi, h, D):
    """Diagonal and off-diagonal of M (-L1) M^{-1} with M = diag(sqrt(w/p)).

    The result is symmetric tridiagonal; an eigenvector chi gives the
    eigenfunction phi = sqrt(p/w) chi of -L1 with the same eigenvalue.
    """
    n = Psi.size
    w = trapezoid_weights(n, h)
    dpsi = np.diff(Psi)
    off = -(D / h) / np.sqrt(w[:-1] * w[1:])
    diag = np.zeros(n)
    diag[:-1] += (D / h) * np.exp(0.5 * dpsi) / w[:-1]
    diag[1:] += (D / h) * np.exp(-0.5 * dpsi) / w[1:]
    return diag, off
