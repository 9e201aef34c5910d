"""Fast/slow splitting of a_0 into Dirichlet sine modes and the spectral-gap test.

Modes are sin(k pi (y + R)/(2R)), k = 1..ny, which on the uniform interior
grid form the orthogonal DST-I basis.  Modes k < k0 are slow.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt, sqrt, pi

import numpy as np
import scipy.sparse as sp
from scipy.fft import dst, idst

from .coefsys import dirichlet_laplacian
from .errors import DegenerateDenominator, InvalidSplit

GAMMA_HALF = sqrt(pi)


def _rational(v):
    return Fraction(repr(float(v)))


def select_k0(zeta, lambda_min, prefactor=1.0):
    """The unique k0 with k0^2 <= lambda_min/(zeta*prefactor) < (k0+1)^2.

    Inputs are converted to exact rationals from their shortest decimal
    representation so the floor is not disturbed by rounding.
    """
    if zeta <= 0 or lambda_min <= 0 or prefactor <= 0:
        raise InvalidSplit("zeta, lambda_min and prefactor must be positive")
    q = _rational(lambda_min) / (_rational(zeta) * _rational(prefactor))
    k0 = isqrt(q.numerator // q.denominator)
    if k0 < 1:
        raise InvalidSplit(f"lambda_min/zeta = {float(q):g} < 1 leaves no slow mode cutoff")
    return k0


@dataclass(frozen=True)
class SineSplit:
    zeta: float
    k0: int
    NS: float
    NF: float
    ny: int
    modes_S: range = field(repr=False, default=range(0))
    modes_F: range = field(repr=False, default=range(0))


def make_split(zeta, lambda_min, ny, prefactor=1.0):
    k0 = select_k0(zeta, lambda_min, prefactor)
    q = lambda_min / (zeta * prefactor)
    NS = q - (k0 - 1) ** 2
    NF = q - k0 ** 2 + k0 - 1
    if not (0 <= NF < NS):
        raise InvalidSplit(f"NF={NF}, NS={NS} violate 0 <= NF < NS")
    if k0 - 1 > ny:
        raise InvalidSplit(f"grid with {ny} modes cannot hold {k0 - 1} slow modes")
    return SineSplit(float(zeta), k0, float(NS), float(NF), int(ny),
                     range(1, k0), range(k0, ny + 1))


def sine_coefficients(a0):
    """Orthonormal DST-I coefficients along the last axis."""
    return dst(np.asarray(a0, dtype=float), type=1, norm="ortho", axis=-1)


def from_sine_coefficients(c):
    return idst(np.asarray(c, dtype=float), type=1, norm="ortho", axis=-1)


def sine_matrix(ny):
    """Orthonormal, symmetric, involutory DST-I matrix."""
    k = np.arange(1, ny + 1)
    return np.sqrt(2.0 / (ny + 1)) * np.sin(np.pi * np.outer(k, k) / (ny + 1))


def split_slow(a0, split, R=None):
    """Return (a0_S, a0_F): the k < k0 partial sine sum and the remainder."""
    c = sine_coefficients(a0)
    cs = c.copy()
    cs[..., split.k0 - 1:] = 0.0
    a_s = from_sine_coefficients(cs)
    return a_s, np.asarray(a0, dtype=float) - a_s


def _h2_gram(ny, dy):
    """Gram matrix of the discrete H^2 norm (one-sided end closures) on interior values."""
    E = np.vstack([np.zeros(ny), np.eye(ny), np.zeros(ny)])   # interior -> full grid
    D2 = np.zeros((ny + 2, ny + 2))
    for k in range(1, ny + 1):
        D2[k, k - 1:k + 2] = [1.0, -2.0, 1.0]
    D2[0, :4] = [2.0, -5.0, 4.0, -1.0]
    D2[-1, -4:] = [-1.0, 4.0, -5.0, 2.0]
    D2 /= dy ** 2
    w = np.full(ny + 2, dy)
    w[0] = w[-1] = 0.5 * dy
    B = D2 @ E
    return dy * np.eye(ny) + B.T @ (w[:, None] * B)


def _h1_gram(ny, dy):
    """Gram matrix of |u|^2 + sum over interior faces of (D+ u)^2 dy (range norm)."""
    Dp = (np.eye(ny, k=1) - np.eye(ny))[:-1] / dy
    return dy * np.eye(ny) + dy * Dp.T @ Dp


def power_norm(B, rtol=1e-6, maxit=5000, seed=0):
    """Largest singular value of ``B`` by power iteration on B^T B."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(B.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(maxit):
        u = B @ v
        w = B.T @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = sqrt(nw)
        v = w / nw
        if abs(new - sigma) <= rtol * new:
            return new
        sigma = new
    return sigma


def estimate_lipschitz(sys, rtol=1e-6):
    """Operator norms of the coupling rows from discrete H^2 to discrete H^1.

    Returns (L_F, L_G) with L_F[j-1] the norm of row j (j = 1..J) acting on
    the whole state and L_G the norm of the a_0 row.  The domain norm is the
    l2 product of H^2 norms of the components.
    """
    n, ny = sys.J + 1, sys.ny
    C = sys.couple.toarray() if sp.issparse(sys.couple) else np.asarray(sys.couple)
    L2 = np.linalg.cholesky(_h2_gram(ny, sys.dy))
    L1 = np.linalg.cholesky(_h1_gram(ny, sys.dy))
    # B = L1^T C_row L2^{-T} per block
    inv2T = np.linalg.inv(L2.T)
    Dinv = np.kron(np.eye(n), inv2T)
    norms = []
    for j in range(n):
        row = C[j * ny:(j + 1) * ny]
        B = L1.T @ row @ Dinv
        norms.append(power_norm(B, rtol))
    return norms[1:], norms[0]


@dataclass(frozen=True)
class GapReport:
    L_spec: float
    terms: tuple
    lipschitz_F: tuple
    lipschitz_G: float
    L_simplified: float
    ok: bool
    eps: float
    zeta: float
    k0: int


def spectral_gap(eps, zeta, split, lambdas, L_F, L_G):
    """Evaluate the gap functional with gamma = delta = 1/2.

    ``lambdas[j-1]`` and ``L_F[j-1]`` belong to fast component j.  The ok flag
    uses the full expression; the eps = zeta form is returned alongside.
    """
    if eps / zeta > 1 + 1e-12:
        raise DegenerateDenominator("eps/zeta must not exceed 1")
    lam = np.asarray(lambdas, dtype=float)
    LF = np.asarray(L_F, dtype=float)
    denom = 2 * (eps / zeta - 1) * (-lam) + eps * (split.NS + split.NF)
    if np.any(denom <= 0):
        raise DegenerateDenominator(f"non-positive denominator {denom.min():g}")
    gap = split.NS - split.NF
    if gap <= 0:
        raise DegenerateDenominator("NS - NF must be positive")
    t1 = float(np.sum(eps * sqrt(2.0) * GAMMA_HALF * LF / np.sqrt(denom)))
    t2 = sqrt(2.0) * L_G * GAMMA_HALF / sqrt(gap)
    t3 = 2 * L_G * GAMMA_HALF / gap
    L = t1 + t2 + t3
    simp = sqrt(2 * pi) * sqrt(eps) * (float(LF.sum()) + L_G) + 2 * sqrt(pi) * eps * L_G
    return GapReport(L, (t1, t2, t3), tuple(float(v) for v in LF), float(L_G), simp,
                     bool(L < 1), float(eps), float(zeta), split.k0)


def simplified_gap(eps, L_F, L_G):
    """The eps = zeta reduced form of the gap functional."""
    return sqrt(2 * pi) * sqrt(eps) * (float(np.sum(L_F)) + L_G) + 2 * sqrt(pi) * eps * L_G


def gap_boundary(eps_list, J_max, L_of_j, L_G, lambda_of_j, form="full"):
    """Largest J in 1..J_max that passes the gap test at each eps (zeta = eps).

    ``form`` selects the full expression or the eps = zeta reduced form.
    Returns an integer array (0 where no J passes).
    """
    out = []
    for eps in eps_list:
        best = 0
        for J in range(1, J_max + 1):
            LF = [L_of_j(j) for j in range(1, J + 1)]
            if form == "full":
                lam = [lambda_of_j(j) for j in range(1, J + 1)]
                split = make_split(eps, min(lam), 10 ** 9)
                ok = spectral_gap(eps, eps, split, lam, LF, L_G).ok
            else:
                ok = simplified_gap(eps, LF, L_G) < 1
            if ok:
                best = J
            else:
                break
        out.append(best)
    return np.array(out)
