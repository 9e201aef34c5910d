"""Densities from coefficients and back, plus density-space error norms.

Coefficients are extracted with the dual functions psi_j, so
decompose(reconstruct(a)) = a and the expansion is a projection in the
weighted space L^2(1/phi_0).
"""

from dataclasses import dataclass

import numpy as np

from .coefsys import CoefficientState
from .errors import GridMismatch
from .stationary import trapezoid_weights


@dataclass(frozen=True)
class DensityField:
    t: float
    x: np.ndarray
    y: np.ndarray        # full y grid including the Dirichlet endpoints
    values: np.ndarray   # (nx, ny + 2)


def _basis_rows(basis, J, x, y, fn):
    cache = {}
    for j in range(J + 1):
        cache[j] = getattr(basis, fn)(j, y, x)
    return cache


def reconstruct_density(state, basis, x, yfull):
    """Evaluate sum_j a_j(y) phi_j^y(x) on the grid; zero on y = +-R."""
    x = np.asarray(x, dtype=float)
    yfull = np.asarray(yfull, dtype=float)
    a = np.asarray(state.a)
    J = a.shape[0] - 1
    if a.shape[1] != yfull.size - 2:
        raise GridMismatch("state does not match the interior of the y grid")
    vals = np.zeros((x.size, yfull.size))
    for k, y in enumerate(yfull[1:-1]):
        rows = _basis_rows(basis, J, x, y, "eval")
        vals[:, k + 1] = sum(a[j, k] * rows[j] for j in range(J + 1))
    return DensityField(float(state.t), x, yfull, vals)


def decompose_density(rho, basis, x, yfull, J=None, t=0.0):
    """Coefficients a_j(y) = int rho psi_j^y dx / N_j at the interior y nodes.

    ``rho`` is sampled on (x, yfull); the x-integral uses the trapezoid rule.
    """
    x = np.asarray(x, dtype=float)
    yfull = np.asarray(yfull, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (x.size, yfull.size):
        raise GridMismatch(f"rho has shape {rho.shape}, grid is {(x.size, yfull.size)}")
    if J is None:
        J = basis.J
    w = trapezoid_weights(x.size, x[1] - x[0])
    a = np.zeros((J + 1, yfull.size - 2))
    for k, y in enumerate(yfull[1:-1]):
        col = w * rho[:, k + 1]
        for j in range(J + 1):
            a[j, k] = col @ basis.dual(j, y, x) / basis.dual_norms[j]
    return CoefficientState(float(t), a)


def density_error(a, b):
    """L1, L2 and Linf norms of a - b with trapezoid weights in both directions."""
    if a.values.shape != b.values.shape or not (
            np.allclose(a.x, b.x, rtol=0, atol=1e-12) and np.allclose(a.y, b.y, rtol=0, atol=1e-12)):
        raise GridMismatch("density fields live on different grids")
    d = a.values - b.values
    wx = trapezoid_weights(a.x.size, a.x[1] - a.x[0])
    wy = trapezoid_weights(a.y.size, a.y[1] - a.y[0])
    W = np.outer(wx, wy)
    return (float((W * np.abs(d)).sum()), float(np.sqrt((W * d * d).sum())),
            float(np.abs(d).max()))


def marginal(field):
    """Slow marginal int rho dx on the full y grid."""
    wx = trapezoid_weights(field.x.size, field.x[1] - field.x[0])
    return wx @ field.values


def slow_manifold_density(graph, s, basis, x, yfull):
    """Density of the graph point over slow coordinates ``s``."""
    a = graph.state(s)
    return reconstruct_density(CoefficientState(0.0, a), basis, x, yfull)
