"""Eigenfunctions of the fast operator, parametric in the slow variable.

Two sources are provided.  The Hermite path covers fast drifts of the form
f = (a(y) - x)/tau and is exact.  The numeric path discretizes the fast
operator with exponentially fitted fluxes, which keeps it symmetric in the
weighted inner product with weight 1/p_s, so the spectrum is real and the
eigenfunctions are orthogonal in that inner product.

Besides phi_j the basis exposes the dual functions psi_j = phi_j/phi_0, the
eigenfunctions of the adjoint operator.  They satisfy
int phi_i psi_j dx = N_j delta_ij with N_j = ``dual_norms[j]``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial, sqrt, pi

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import SpectrumViolation, UnsupportedModel
from .model import OU, affine_fast_drift
from .stationary import log_potential, symmetric_fast_operator, trapezoid_weights

HERMITE = "HermiteAnalytic"
NUMERIC = "NumericGrid"
N_SPARE = 2


def hermite_table(n, z):
    """Physicists' Hermite polynomials H_0..H_n at ``z`` by the three-term recurrence."""
    z = np.asarray(z, dtype=float)
    out = np.empty((n + 1,) + z.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = 2.0 * z
    for k in range(1, n):
        out[k + 1] = 2.0 * z * out[k] - 2.0 * k * out[k - 1]
    return out


def hermite(n, z):
    if n < 0:
        return np.zeros_like(np.asarray(z, dtype=float))
    return hermite_table(n, z)[n]


@dataclass
class EigenBasis:
    """Common interface of both sources.

    ``norms[j]`` is the plain integral of phi_j^2; ``dual_norms[j]`` is the
    biorthogonal normalizer int phi_j psi_j dx.
    """
    J: int
    lambdas: np.ndarray
    norms: np.ndarray
    dual_norms: np.ndarray
    C0: float
    source: str

    @property
    def size(self):
        return self.J + 1 + N_SPARE


@dataclass
class HermiteBasis(EigenBasis):
    tau: float = 1.0
    scale: float = 1.0  # s in u = (x - a(y)) s
    affine: object = field(default=None, repr=False)

    def z(self, y, x):
        return (np.asarray(x, dtype=float) - self.affine.a(y)) * (self.scale / sqrt(2.0))

    def eval(self, j, y, x):
        z = self.z(y, x)
        return np.exp(-z * z) * hermite(j, z)

    def eval_dy(self, j, y, x):
        z = self.z(y, x)
        return (self.affine.da(y) * self.scale / sqrt(2.0)) * hermite(j + 1, z) * np.exp(-z * z)

    def dual(self, j, y, x):
        return hermite(j, self.z(y, x))

    def dual_dy(self, j, y, x):
        z = self.z(y, x)
        return -self.affine.da(y) * self.scale * sqrt(2.0) * j * hermite(j - 1, z)

    def dual_dyy(self, j, y, x):
        z = self.z(y, x)
        da = self.affine.da(y)
        d2a = self.affine.d2a(y)
        s = self.scale
        return ((da * s) ** 2 * 2.0 * j * (j - 1) * hermite(j - 2, z)
                - d2a * s * sqrt(2.0) * j * hermite(j - 1, z))

    def stationary(self, y, x):
        """p_s as the unit-mass multiple of phi_0."""
        return self.eval(0, y, x) / self.C0


def hermite_basis(model, J, X=8.0):
    """Analytic basis for fast drifts f = (a(y) - x)/tau.

    With u = (x - a(y)) sqrt(2/(sigma1^2 tau)) the eigenfunctions are
    exp(-u^2/2) H_n(u/sqrt 2) with eigenvalues n/tau.
    """
    if model.kind != OU:
        raise UnsupportedModel("the Hermite path needs kind = OrnsteinUhlenbeck")
    aff = affine_fast_drift(model, X)
    s = sqrt(2.0 / (model.sigma1 ** 2 * aff.tau))
    n = J + 1 + N_SPARE
    t, w = np.polynomial.hermite.hermgauss(max(64, 2 * n + 2))
    norms = np.array([(w * hermite(j, t / sqrt(2.0)) ** 2).sum() / s for j in range(n)])
    dual = np.array([sqrt(2.0 * pi) * 2.0 ** j * factorial(j) / s for j in range(n)])
    lam = np.arange(n) / aff.tau
    return HermiteBasis(J, lam, norms, dual, sqrt(2.0 * pi) / s, HERMITE,
                        tau=aff.tau, scale=s, affine=aff)


@dataclass(frozen=True)
class NodeSolution:
    """Discrete eigen-data at one slow-variable value.

    ``chi`` rows satisfy sum(w chi_i chi_j) = delta_ij; phi = sqrt(p) chi and
    psi = chi / sqrt(p).
    """
    y: float
    lambdas: np.ndarray
    chi: np.ndarray
    p: np.ndarray
    logp: np.ndarray


def _fix_signs(chi, ref=None, w=None):
    chi = chi.copy()
    for j in range(chi.shape[0]):
        if ref is not None:
            if (w * chi[j] * ref[j]).sum() < 0:
                chi[j] = -chi[j]
            continue
        v = chi[j]
        thresh = 1e-3 * np.abs(v).max()
        inner = v[1:-1]
        ext = np.where(((inner - v[:-2]) * (v[2:] - inner) <= 0) & (np.abs(inner) > thresh))[0]
        k = ext[0] + 1 if ext.size else int(np.argmax(np.abs(v)))
        if v[k] < 0:
            chi[j] = -v
    return chi


@dataclass
class NumericBasis(EigenBasis):
    model: object = field(default=None, repr=False)
    disc: object = field(default=None, repr=False)
    dy_param: float = 1e-4

    def __post_init__(self):
        self.x = self.disc.xgrid()
        self.w = trapezoid_weights(self.x.size, self.disc.hx)
        self._solve = lru_cache(maxsize=4096)(self._solve_uncached)

    def _solve_uncached(self, y, ref_y=None):
        m = self.model
        psi = log_potential(m, y, self.x)
        D = 0.5 * m.sigma1 ** 2
        diag, off = symmetric_fast_operator(psi, self.disc.hx, D)
        n = self.size
        vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, n - 1))
        if vals.min() < -1e-8:
            raise SpectrumViolation(f"eigenvalue {vals.min():.3e} < 0 at y={y}")
        top = psi.max()
        p = np.exp(psi - top)
        Z = float(self.w @ p)
        p /= Z
        logp = psi - top - np.log(Z)
        chi = vecs.T / np.sqrt(self.w)[None, :]
        chi[0] = np.sqrt(p)  # exact discrete kernel, unit mass
        vals = vals.copy()
        vals[0] = 0.0
        if ref_y is None:
            chi = _fix_signs(chi)
        else:
            chi = _fix_signs(chi, self._solve(ref_y).chi, self.w)
        return NodeSolution(y, vals, chi, p, logp)

    def node(self, y):
        return self._solve(float(y))

    def node_derivatives(self, y):
        """chi, d chi/dy, d2 chi/dy2, d log p/dy, d2 log p/dy2 by central differences."""
        y = float(y)
        h = self.dy_param
        c = self._solve(y)
        lo = self._solve(y - h, y)
        hi = self._solve(y + h, y)
        chi_y = (hi.chi - lo.chi) / (2 * h)
        chi_yy = (hi.chi - 2 * c.chi + lo.chi) / (h * h)
        l_y = (hi.logp - lo.logp) / (2 * h)
        l_yy = (hi.logp - 2 * c.logp + lo.logp) / (h * h)
        return c, chi_y, chi_yy, l_y, l_yy

    def _interp(self, vals, x):
        x = np.asarray(x, dtype=float)
        if x.shape == self.x.shape and np.array_equal(x, self.x):
            return vals
        return CubicSpline(self.x, vals)(x)

    def eval(self, j, y, x):
        s = self.node(y)
        return self._interp(np.sqrt(s.p) * s.chi[j], x)

    def eval_dy(self, j, y, x):
        y = float(y)
        h = self.dy_param
        lo = self._solve(y - h, y)
        hi = self._solve(y + h, y)
        d = (np.sqrt(hi.p) * hi.chi[j] - np.sqrt(lo.p) * lo.chi[j]) / (2 * h)
        return self._interp(d, x)

    def dual(self, j, y, x, floor=1e-13):
        """psi_j = chi_j/sqrt(p), set to zero where p is below ``floor`` times its peak."""
        s = self.node(y)
        mask = s.p > floor * s.p.max()
        out = np.zeros_like(s.p)
        out[mask] = s.chi[j][mask] / np.sqrt(s.p[mask])
        return self._interp(out, x)

    def stationary(self, y, x):
        return self._interp(self.node(y).p, x)


def numeric_basis(model, disc, J, y_ref=0.0, dy_param=None):
    """Finite-difference eigenbasis; eigen-data are re-solved lazily per y."""
    if dy_param is None:
        dy_param = 1e-4 * max(1.0, model.R)
    n = J + 1 + N_SPARE
    tmp = NumericBasis(J, np.zeros(n), np.zeros(n), np.ones(n), 1.0, NUMERIC,
                       model=model, disc=disc, dy_param=dy_param)
    s = tmp.node(y_ref)
    tmp.lambdas = s.lambdas.copy()
    tmp.norms = np.array([(tmp.w * s.p * s.chi[j] ** 2).sum() for j in range(n)])
    return tmp


def make_basis(model, disc, J, path="auto"):
    """Pick the Hermite path for the affine family unless ``path`` says otherwise."""
    if path == "numeric":
        return numeric_basis(model, disc, J)
    if path == "hermite":
        return hermite_basis(model, J, disc.X)
    if model.kind == OU:
        try:
            return hermite_basis(model, J, disc.X)
        except UnsupportedModel:
            pass
    return numeric_basis(model, disc, J)
