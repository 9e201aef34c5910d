"""Problem definition for the fast-slow SDE on the strip and its assumption checks.

The SDE is

    dx = f(x, y)/eps dt + sigma1/sqrt(eps) dW1,
    dy = g(x, y) dt + sigma2 dW2,

on R x (-R, R) with absorbing boundaries at y = +-R.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from .errors import InvalidModel, UnsupportedModel
from .expr import resolve_drift

OU = "OrnsteinUhlenbeck"
GENERAL = "GeneralAdditive"

HYPERBOLICITY_TOL = 1e-8
ROOT_SUBINTERVALS = 512
ROOT_XTOL = 1e-12


@dataclass(frozen=True)
class SdeModel:
    f: Callable
    g: Callable
    sigma1: float
    sigma2: float
    epsilon: float
    R: float
    kind: str = GENERAL

    @classmethod
    def from_strings(cls, f, g, sigma1, sigma2, epsilon, R, kind=None):
        """Build a model from catalogue names or expressions."""
        if kind is None:
            kind = OU if f.strip() == "ou_linear" else GENERAL
        return cls(resolve_drift(f, "f"), resolve_drift(g, "g"), float(sigma1),
                   float(sigma2), float(epsilon), float(R), kind)

    def with_epsilon(self, epsilon):
        return SdeModel(self.f, self.g, self.sigma1, self.sigma2, float(epsilon),
                        self.R, self.kind)

    def with_g(self, g):
        return SdeModel(self.f, g, self.sigma1, self.sigma2, self.epsilon, self.R, self.kind)


def linear_ou_model(epsilon=1e-2, R=2.0):
    """The canonical linear fixture: f = y - x, g = -x, sigma1 = sigma2 = sqrt(2)."""
    return SdeModel.from_strings("ou_linear", "ou_linear", np.sqrt(2.0), np.sqrt(2.0),
                                 epsilon, R, kind=OU)


@dataclass(frozen=True)
class Discretization:
    X: float = 8.0
    nx: int = 801
    ny: int = 79
    dt: float | None = None
    quad_nodes: int = 64

    def __post_init__(self):
        if self.X <= 0:
            raise InvalidModel("X", "must be positive")
        if self.nx < 16 or self.ny < 16:
            raise InvalidModel("nx/ny", "grids need at least 16 points")
        if self.quad_nodes < 32:
            raise InvalidModel("quad_nodes", "need at least 32 nodes")
        if self.dt is not None and self.dt <= 0:
            raise InvalidModel("dt", "must be positive")

    def xgrid(self):
        return np.linspace(-self.X, self.X, self.nx)

    @property
    def hx(self):
        return 2.0 * self.X / (self.nx - 1)

    def ygrid(self, R):
        """Interior y nodes; the Dirichlet endpoints are excluded."""
        return ygrid_full(R, self.ny)[1:-1]

    def ygrid_full(self, R):
        return ygrid_full(R, self.ny)


def ygrid_full(R, ny):
    """``ny`` interior nodes plus the two Dirichlet endpoints."""
    return np.linspace(-R, R, ny + 2)


@dataclass
class HyperbolicityReport:
    ok: bool
    violations: list = field(default_factory=list)
    roots: dict = field(default_factory=dict)
    unbracketed: list = field(default_factory=list)


def _dx(fun, x, y):
    h = 1e-6 * max(1.0, abs(x))
    return (fun(x + h, y) - fun(x - h, y)) / (2 * h)


def check_normal_hyperbolicity(model, y_samples, X=8.0, tol=HYPERBOLICITY_TOL):
    """Locate the zero set of ``f(., y)`` on [-X, X] and test the transversality.

    Roots are bracketed on a uniform partition and refined by bisection.  A
    sample without any sign change is listed in ``unbracketed``; that is not
    a violation on its own.
    """
    nodes = np.linspace(-X, X, ROOT_SUBINTERVALS + 1)
    report = HyperbolicityReport(ok=True)
    for y in y_samples:
        y = float(y)
        if abs(y) >= model.R:
            raise InvalidModel("y_samples", f"y = {y} outside (-R, R)")
        fy = lambda s: float(model.f(s, y))
        vals = np.array([fy(s) for s in nodes])
        roots = []
        for i in range(ROOT_SUBINTERVALS):
            a, b = nodes[i], nodes[i + 1]
            fa, fb = vals[i], vals[i + 1]
            if fa == 0.0:
                roots.append(float(a))
            elif fa * fb < 0:
                roots.append(float(bisect(fy, a, b, xtol=ROOT_XTOL)))
        if vals[-1] == 0.0:
            roots.append(float(nodes[-1]))
        report.roots[y] = roots
        if not roots:
            report.unbracketed.append(y)
        for r in roots:
            d = float(_dx(model.f, r, y))
            if not abs(d) > tol:
                report.violations.append((r, y))
    report.ok = not report.violations
    return report


@dataclass
class ValidationReport:
    ok: bool
    checks: dict


def validate_model(model, disc, cap=1e8):
    """Check positivity of parameters and finiteness/boundedness of the drifts.

    Raises :class:`InvalidModel` naming the first failing field.
    """
    checks = {}
    for name in ("sigma1", "sigma2", "epsilon", "R"):
        val = getattr(model, name)
        if not (np.isfinite(val) and val > 0):
            raise InvalidModel(name, f"must be positive, got {val}")
        checks[name] = True
    if model.kind not in (OU, GENERAL):
        raise InvalidModel("kind", f"unknown kind {model.kind!r}")
    x = disc.xgrid()
    y = disc.ygrid_full(model.R)
    X, Y = np.meshgrid(x, y, indexing="ij")
    hx = 1e-6 * np.maximum(1.0, np.abs(X))
    hy = 1e-6 * np.maximum(1.0, np.abs(Y))
    for name in ("f", "g"):
        fun = getattr(model, name)
        samples = {
            "value": np.asarray(fun(X, Y), dtype=float),
            "d/dx": (fun(X + hx, Y) - fun(X - hx, Y)) / (2 * hx),
            "d/dy": (fun(X, Y + hy) - fun(X, Y - hy)) / (2 * hy),
        }
        for what, arr in samples.items():
            arr = np.broadcast_to(arr, X.shape)
            bad = ~np.isfinite(arr)
            if bad.any():
                i, k = np.argwhere(bad)[0]
                raise InvalidModel(name, f"non-finite {what} at x={float(x[i])!r}, y={float(y[k])!r}")
            big = np.abs(arr) > cap
            if big.any():
                i, k = np.argwhere(big)[0]
                raise InvalidModel(name, f"|{what}| exceeds {cap:g} at x={float(x[i])!r}, y={float(y[k])!r}")
        checks[name] = True
    return ValidationReport(ok=True, checks=checks)


@dataclass(frozen=True)
class AffineDrift:
    """Fast drift of the form f = (a(y) - x)/tau."""
    tau: float
    a: Callable
    da: Callable
    d2a: Callable


def affine_fast_drift(model, X=8.0, rtol=1e-9):
    """Detect the affine fast-drift family; raise :class:`UnsupportedModel` otherwise."""
    xs = np.linspace(-X, X, 9)
    ys = np.linspace(-0.9 * model.R, 0.9 * model.R, 7)
    slopes = []
    for y in ys:
        v = np.asarray(model.f(xs, y), dtype=float)
        coef = np.polyfit(xs, v, 1)
        scale = max(1.0, np.max(np.abs(v)))
        if np.max(np.abs(np.polyval(coef, xs) - v)) > rtol * scale * 10:
            raise UnsupportedModel("fast drift is not affine in x")
        slopes.append(coef[0])
    slopes = np.array(slopes)
    if np.ptp(slopes) > rtol * max(1.0, np.max(np.abs(slopes))) * 10:
        raise UnsupportedModel("fast drift slope depends on y")
    b = -float(np.mean(slopes))
    if not b > 0:
        raise UnsupportedModel("fast drift is not contracting")
    tau = 1.0 / b
    f = model.f

    def a(y):
        return tau * np.asarray(f(0.0, y), dtype=float)

    h = 1e-3

    def da(y):
        y = np.asarray(y, dtype=float)
        return (a(y - 2 * h) - 8 * a(y - h) + 8 * a(y + h) - a(y + 2 * h)) / (12 * h)

    def d2a(y):
        y = np.asarray(y, dtype=float)
        return (-a(y - 2 * h) + 16 * a(y - h) - 30 * a(y) + 16 * a(y + h)
                - a(y + 2 * h)) / (12 * h * h)

    return AffineDrift(tau, a, da, d2a)
