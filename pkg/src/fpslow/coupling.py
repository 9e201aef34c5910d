"""Coupling tensors of the projected coefficient system.

Projecting the full Fokker-Planck equation onto row j uses a test function.
Two conventions are supported:

``dual``
    test with psi_j = phi_j/phi_0 (adjoint eigenfunctions).  Rows decouple
    in the time derivative because int phi_i psi_j = N_j delta_ij, and the
    y-dependence of the basis produces the extra diffusion-induced tensors
    ``Dkj`` and ``Dtil``.  This reproduces the full equation exactly on the
    span of the basis.
``plain``
    test with phi_j itself and keep only the g-tensors
    G_kj = int g phi_k phi_j and Gt_kj = int g phi_k d_y phi_j, dividing by
    C_jj = int phi_j^2.  Provided for comparison; phi_j are not orthogonal in
    the plain inner product, so this row system is not the exact projection.

Index convention for every 3-index array ``T[i, j, n]``: ``i`` is the source
component a_i, ``j`` the row, ``n`` the y node.
"""

from dataclasses import dataclass
from math import factorial, pi, sqrt

import numpy as np

from .eigenbasis import HERMITE, hermite_table
from .errors import QuadratureDivergence

DUAL = "dual"
PLAIN = "plain"


@dataclass(frozen=True)
class CouplingTensors:
    J: int
    y: np.ndarray
    C0: float
    G: np.ndarray        # (J+1, n): int g phi_i dx
    Gkj: np.ndarray      # (J+1, J+1, n)
    Gtil: np.ndarray     # (J+1, J+1, n)
    Dkj: np.ndarray      # (J+1, J+1, n): int phi_i d_y psi_j dx (dual only)
    Dtil: np.ndarray     # (J+1, J+1, n): int phi_i d_yy psi_j dx (dual only)
    norms: np.ndarray    # (J+1,): row normalizers, norms[0] = C0
    lambdas: np.ndarray  # (J+1, n): fast eigenvalues per node
    convention: str

    def scaled(self, alpha):
        """Tensors for the slow drift alpha*g."""
        return CouplingTensors(self.J, self.y, self.C0, alpha * self.G, alpha * self.Gkj,
                               alpha * self.Gtil, self.Dkj, self.Dtil, self.norms,
                               self.lambdas, self.convention)

    def without_g(self):
        return self.scaled(0.0)


def _hermite_node(basis, model, y, J, nq, convention):
    """All x-integrals at one y node by Gauss-Hermite quadrature."""
    aff, s = basis.affine, basis.scale
    t, w = np.polynomial.hermite.hermgauss(nq)
    a = float(aff.a(y))
    da = float(aff.da(y))
    d2a = float(aff.d2a(y))
    n = J + 1
    # envelope exp(-u^2/2): u = sqrt2 t, z = t
    xd = a + sqrt(2.0) * t / s
    wd = w * sqrt(2.0) / s
    Hd = hermite_table(J + 2, t)
    gd = np.asarray(model.g(xd, y), dtype=float) * np.ones_like(t)
    G = (wd * gd * Hd[:n]).sum(axis=1)
    if convention == PLAIN:
        # envelope exp(-u^2): u = t, z = t/sqrt2
        xp = a + t / s
        wp = w / s
        Hp = hermite_table(J + 2, t / sqrt(2.0))
        gp = np.asarray(model.g(xp, y), dtype=float) * np.ones_like(t)
        Gkj = np.einsum("q,iq,jq->ij", wp * gp, Hp[:n], Hp[:n])
        dphi = (da * s / sqrt(2.0)) * Hp[1:n + 1]
        Gtil = np.einsum("q,iq,jq->ij", wp * gp, Hp[:n], dphi)
        zero = np.zeros((n, n))
        return G, Gkj, Gtil, zero, zero
    jj = np.arange(n)[:, None]
    Hm1 = np.vstack([np.zeros_like(t), Hd[:n - 1]])
    Hm2 = np.vstack([np.zeros((2, t.size)), Hd[:max(n - 2, 0)]])[:n]
    dpsi = -da * s * sqrt(2.0) * jj * Hm1
    d2psi = (da * s) ** 2 * 2.0 * jj * (jj - 1) * Hm2 - d2a * s * sqrt(2.0) * jj * Hm1
    Gkj = np.einsum("q,iq,jq->ij", wd * gd, Hd[:n], Hd[:n])
    Gtil = np.einsum("q,iq,jq->ij", wd * gd, Hd[:n], dpsi)
    Dkj = np.einsum("q,iq,jq->ij", wd, Hd[:n], dpsi)
    Dtil = np.einsum("q,iq,jq->ij", wd, Hd[:n], d2psi)
    return G, Gkj, Gtil, Dkj, Dtil


def _numeric_node(basis, model, y, J, convention):
    """All x-integrals at one y node by the trapezoid rule on the x grid."""
    node, chi_y, chi_yy, l_y, l_yy = basis.node_derivatives(y)
    n = J + 1
    w = basis.w
    chi, cy, cyy = node.chi[:n], chi_y[:n], chi_yy[:n]
    sp_ = np.sqrt(node.p)
    g = np.asarray(model.g(basis.x, y), dtype=float) * np.ones_like(basis.x)
    G = (w * g * sp_ * chi).sum(axis=1)
    if convention == PLAIN:
        wg = w * g * node.p
        Gkj = np.einsum("q,iq,jq->ij", wg, chi, chi)
        Gtil = np.einsum("q,iq,jq->ij", wg, chi, cy + 0.5 * chi * l_y)
        zero = np.zeros((n, n))
        return G, Gkj, Gtil, zero, zero
    Y = cy - 0.5 * chi * l_y
    Z = cyy - cy * l_y - 0.5 * chi * l_yy + 0.25 * chi * l_y ** 2
    Gkj = np.einsum("q,iq,jq->ij", w * g, chi, chi)
    Gtil = np.einsum("q,iq,jq->ij", w * g, chi, Y)
    Dkj = np.einsum("q,iq,jq->ij", w, chi, Y)
    Dtil = np.einsum("q,iq,jq->ij", w, chi, Z)
    return G, Gkj, Gtil, Dkj, Dtil


def _fill(basis, model, ygrid, J, convention, nq):
    ygrid = np.asarray(ygrid, dtype=float)
    n, m = J + 1, ygrid.size
    out = [np.zeros((n, m))] + [np.zeros((n, n, m)) for _ in range(4)]
    lam = np.zeros((n, m))
    for k, y in enumerate(ygrid):
        if basis.source == HERMITE:
            vals = _hermite_node(basis, model, y, J, nq, convention)
            lam[:, k] = basis.lambdas[:n]
        else:
            vals = _numeric_node(basis, model, y, J, convention)
            lam[:, k] = basis.node(y).lambdas[:n]
        out[0][:, k] = vals[0]
        for arr, v in zip(out[1:], vals[1:]):
            arr[:, :, k] = v
    return out, lam


def compute_coupling(basis, model, ygrid, disc, J=None, convention=DUAL, check=True):
    """Sample the coupling tensors on ``ygrid``.

    On the Hermite path the quadrature is repeated with twice the nodes and
    :class:`QuadratureDivergence` is raised when the two disagree by more than
    1e-6 relative to the largest entry.
    """
    if J is None:
        J = basis.J
    if J > basis.J:
        raise ValueError(f"basis holds indices up to {basis.J}, requested {J}")
    if convention not in (DUAL, PLAIN):
        raise ValueError(f"unknown convention {convention!r}")
    nq = disc.quad_nodes
    arrs, lam = _fill(basis, model, ygrid, J, convention, nq)
    if check and basis.source == HERMITE:
        fine, _ = _fill(basis, model, ygrid, J, convention, 2 * nq)
        scale = max(max(np.abs(f).max() for f in fine), 1e-300)
        diff = max(np.abs(a - f).max() for a, f in zip(arrs, fine))
        if diff > 1e-6 * scale:
            raise QuadratureDivergence(
                f"quadrature with {nq} and {2 * nq} nodes differs by {diff / scale:.2e}")
    G, Gkj, Gtil, Dkj, Dtil = arrs
    if convention == DUAL:
        norms = np.asarray(basis.dual_norms[:J + 1], dtype=float).copy()
    else:
        norms = np.asarray(basis.norms[:J + 1], dtype=float).copy()
        norms[0] = basis.C0
    return CouplingTensors(J, np.asarray(ygrid, dtype=float).copy(), float(basis.C0), G, Gkj,
                           Gtil, Dkj, Dtil, norms, lam, convention)


def odd_factorial(n):
    """(2n-1)!! with the convention (-1)!! = 1."""
    out = 1
    for k in range(1, 2 * n, 2):
        out *= k
    return out


def tabulated_linear_ou(J, y):
    """Delta-formula tables for the linear fixture (f = y - x, g = -x, sigma1 = sqrt 2).

    These are the closed forms as customarily quoted for this example, in the
    plain convention.  They are kept verbatim for comparison with quadrature;
    several entries disagree with the integrals they claim to evaluate.
    Returns a dict with C0, Cjj, G, G0j, Gkj, Gtil where Gkj, Gtil are (J+1, J+1)
    arrays indexed [k, j].
    """
    n = J + 1
    Cjj = np.array([sqrt(pi)] + [sqrt(pi / 2) * odd_factorial(j) for j in range(1, n + 2)])
    G = np.zeros(n)
    G[0] = -y * sqrt(2 * pi)
    if n > 1:
        G[1] = -2 * sqrt(pi)
    Gkj = np.zeros((n, n))
    Gtil = np.zeros((n, n))
    for k in range(n):
        for j in range(n):
            v = 0.0
            if k == j:
                v -= y * sqrt(2.0) * Cjj[j]
            if k + 1 == j:
                v -= Cjj[j]
            if k - 1 == j:
                v -= 2 * k * Cjj[j]
            Gkj[k, j] = v
            t = 0.0
            if k == j + 1:
                t -= y * Cjj[j + 1]
            if k + 1 == j + 1:
                t -= Cjj[j + 1] / sqrt(2.0)
            if k - 1 == j + 1:
                t -= 2 * k * Cjj[j + 1] / sqrt(2.0)
            Gtil[k, j] = t
    G0j = np.array([-sqrt(pi / 2) if j == 1 else 0.0 for j in range(n)])
    return {"C0": sqrt(2 * pi), "Cjj": Cjj[:n], "G": G, "G0j": G0j, "Gkj": Gkj, "Gtil": Gtil}


def dual_linear_ou(J, y):
    """Exact dual-convention tensors for the linear fixture, derived by hand.

    With e_j = He_j(u) exp(-u^2/2) and u = x - y, phi_j = 2^{j/2} e_j and
    psi_j = 2^{j/2} He_j(u), so every integral reduces to
    int He_i He_j exp(-u^2/2) du = sqrt(2 pi) j! delta_ij together with
    u He_j = He_{j+1} + j He_{j-1}.
    """
    n = J + 1
    c = sqrt(2 * pi)
    Gkj = np.zeros((n, n))
    Gtil = np.zeros((n, n))
    Dkj = np.zeros((n, n))
    Dtil = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            pref = 2.0 ** ((i + j) / 2) * c * factorial(j)
            Gkj[i, j] = -pref * (y * (i == j) + (i + 1 == j) + i * (i - 1 == j))
            Gtil[i, j] = pref * (y * (i == j - 1) + (i == j - 2) + i * (i == j))
            if i == j - 1:
                Dkj[i, j] = -2.0 ** ((2 * j - 1) / 2) * c * factorial(j)
            if i == j - 2:
                Dtil[i, j] = 2.0 ** (j - 1) * c * factorial(j)
    G = Gkj[:, 0].copy()
    norms = np.array([c * 2.0 ** j * factorial(j) for j in range(n)])
    return {"C0": c, "norms": norms, "G": G, "Gkj": Gkj, "Gtil": Gtil, "Dkj": Dkj, "Dtil": Dtil}
