"""Euler-Maruyama ensembles with absorption at |y| >= R.

Randomness is a pure function of (seed, path index, draw counter): the
uniform for draw n of path p is the SplitMix64 output mix(k_p + n*gamma)
with the per-path key k_p = mix(mix(seed) ^ p).  Ensembles are therefore
identical regardless of how paths are partitioned into chunks.  Normals use
the inverse CDF.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def path_keys(seed, paths):
    with np.errstate(over="ignore"):
        s = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA)
        return _mix(s ^ np.asarray(paths, dtype=np.uint64))


def keyed_uniforms(keys, counter):
    """Uniforms in (0, 1) for draw ``counter`` of every path key."""
    with np.errstate(over="ignore"):
        z = _mix(keys + np.uint64(counter + 1) * _GAMMA)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def keyed_normals(keys, counter):
    return ndtri(keyed_uniforms(keys, counter))


@dataclass
class McEnsemble:
    n_paths: int
    seed: int
    dt_sde: float
    t: float
    x: np.ndarray
    y: np.ndarray
    alive: np.ndarray
    histograms: list = field(default_factory=list)   # (t, counts) pairs
    x_edges: np.ndarray = None
    y_edges: np.ndarray = None

    @property
    def absorbed(self):
        return int(self.n_paths - self.alive.sum())


def cell_edges(nodes):
    """Bin edges centred on uniformly spaced nodes."""
    h = nodes[1] - nodes[0]
    return np.concatenate([[nodes[0] - 0.5 * h], 0.5 * (nodes[1:] + nodes[:-1]), [nodes[-1] + 0.5 * h]])


def histogram_density(ens, counts):
    """Counts per bin divided by (n_paths * bin area)."""
    area = np.outer(np.diff(ens.x_edges), np.diff(ens.y_edges))
    return counts / (ens.n_paths * area)


def euler_maruyama(model, n_paths, T, dt_sde, seed, init, snapshot_times=(),
                   x_nodes=None, y_nodes=None, chunk=None):
    """Simulate the fast-slow SDE; absorbed paths are frozen and counted.

    ``init(keys)`` returns initial (x, y) arrays and may draw from counters
    0 and 1; step k uses counters 2k+2 (fast noise) and 2k+3 (slow noise).
    Histograms on cells around (x_nodes, y_nodes) are recorded at the
    requested snapshot times.
    """
    if dt_sde > model.epsilon / 10 * (1 + 1e-12):
        raise ValueError("dt_sde must not exceed eps/10")
    nsteps = int(np.ceil(T / dt_sde - 1e-12))
    dt = T / nsteps
    snap_steps = {int(round(t / dt)): t for t in snapshot_times}
    xe = cell_edges(x_nodes) if x_nodes is not None else None
    ye = cell_edges(y_nodes) if y_nodes is not None else None
    chunk = chunk or n_paths
    X = np.empty(n_paths)
    Y = np.empty(n_paths)
    alive = np.empty(n_paths, dtype=bool)
    hists = {s: 0 for s in snap_steps}
    eps, R = model.epsilon, model.R
    a1 = model.sigma1 * np.sqrt(dt / eps)
    a2 = model.sigma2 * np.sqrt(dt)
    for lo in range(0, n_paths, chunk):
        idx = np.arange(lo, min(lo + chunk, n_paths), dtype=np.uint64)
        keys = path_keys(seed, idx)
        x, y = init(keys)
        x = np.array(x, dtype=float)
        y = np.array(y, dtype=float)
        live = np.abs(y) < R
        for k in range(nsteps):
            dw1 = keyed_normals(keys, 2 * k + 2)
            dw2 = keyed_normals(keys, 2 * k + 3)
            fx = model.f(x, y)
            gy = model.g(x, y)
            xn = x + dt * fx / eps + a1 * dw1
            yn = y + dt * gy + a2 * dw2
            x = np.where(live, xn, x)
            y = np.where(live, yn, y)
            live &= np.abs(y) < R
            if (k + 1) in snap_steps and xe is not None:
                c, _, _ = np.histogram2d(x[live], y[live], bins=[xe, ye])
                hists[k + 1] = hists[k + 1] + c
        X[idx.astype(np.int64)] = x
        Y[idx.astype(np.int64)] = y
        alive[idx.astype(np.int64)] = live
    hl = [(snap_steps[s], hists[s]) for s in sorted(snap_steps)] if xe is not None else []
    return McEnsemble(n_paths, seed, dt, T, X, Y, alive, hl, xe, ye)


def cosine_gaussian_init(R, shift=0.5, width=0.8):
    """Initial law: y with density cos(pi y/(2R))/(4R/pi), x | y ~ N(y + shift, width^2)."""
    def init(keys):
        u = keyed_uniforms(keys, 0)
        y = (2 * R / np.pi) * np.arcsin(2 * u - 1)
        x = y + shift + width * keyed_normals(keys, 1)
        return x, y
    return init


def cosine_gaussian_density(x, y, R, shift=0.5, width=0.8):
    """Density of :func:`cosine_gaussian_init` on a grid (x along axis 0)."""
    X, Y = np.meshgrid(x, y, indexing="ij")
    by = np.where(np.abs(Y) < R, np.cos(np.pi * Y / (2 * R)) * np.pi / (4 * R), 0.0)
    gx = np.exp(-0.5 * ((X - Y - shift) / width) ** 2) / (width * np.sqrt(2 * np.pi))
    return by * gx
