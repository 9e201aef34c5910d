"""Parameter sweeps, log-log rate fits and the end-to-end example pipeline.

Every per-point computation is a pure function of (config, eps, J); points
may run in a process pool and are merged back in plan order, so the CSVs a
sweep writes do not depend on the worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefsys import CoefficientState, assemble, h2_norm, l2_norm
from .config import RunConfig, dump_config
from .coupling import DUAL, compute_coupling
from .csvio import write_csv
from .eigenbasis import make_basis
from .errors import FitUnavailable, NumericalError
from .model import Discretization
from .reconstruct import decompose_density, density_error, reconstruct_density
from .reference.montecarlo import cosine_gaussian_density
from .slowmanifold import lyapunov_perron, manifold_distance, propagate_exact
from .splitting import gap_boundary, make_split, select_k0

QUANTITIES = ("fast_residual", "slow_error", "manifold_distance", "galerkin_error", "gap_ok")
MIN_FIT_POINTS = 4


@dataclass
class SweepPlan:
    eps_list: list
    J_list: list
    quantities: list
    config: RunConfig
    out_dir: str
    seed: int = 42
    workers: int = 1
    manifold_eps_list: list = None

    def __post_init__(self):
        eps = np.asarray(self.eps_list, dtype=float)
        if eps.size < MIN_FIT_POINTS:
            raise ValueError(f"eps_list needs at least {MIN_FIT_POINTS} points")
        if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
            raise ValueError("eps_list must be positive and strictly decreasing")
        bad = set(self.quantities) - set(QUANTITIES)
        if bad:
            raise ValueError(f"unknown quantities: {sorted(bad)}")
        if not self.J_list:
            raise ValueError("J_list is empty")
        if self.manifold_eps_list is None:
            self.manifold_eps_list = list(self.eps_list)


@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: list                     # (log eps, log value) actually fitted
    saturated: list = field(default_factory=list)

    def within(self, target, tol):
        return abs(self.slope - target) <= tol


def fit_rate(x, values, floor=0.0, min_points=MIN_FIT_POINTS):
    """Least-squares line through (log x, log value), skipping saturated points.

    A point is saturated when its value is not above ``floor``.  Fewer than
    ``min_points`` usable points raise :class:`FitUnavailable`.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    use = np.isfinite(v) & (v > floor) & (v > 0) & (x > 0)
    sat = [(float(np.log(a)), float(np.log(b)) if b > 0 else float("-inf"))
           for a, b, u in zip(x, v, use) if not u]
    if use.sum() < min_points:
        raise FitUnavailable(f"{int(use.sum())} usable points, need {min_points}")
    lx, lv = np.log(x[use]), np.log(v[use])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, lv, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss_tot = float(((lv - lv.mean()) ** 2).sum())
    r2 = 1.0 - float(((lv - pred) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    return RateFit(float(slope), float(icpt), r2, list(zip(lx.tolist(), lv.tolist())), sat)


# ---------------------------------------------------------------------------
# pipeline pieces

@dataclass
class Pipeline:
    model: object
    disc: Discretization
    basis: object
    coupling: object
    system: object


def build_pipeline(cfg, eps, J, ny=None, X=None):
    """Model, basis, coupling tensors and assembled truncated system at ``eps``."""
    model = cfg.build_model(eps)
    disc = cfg.build_disc(ny=ny, X=X)
    basis = make_basis(model, disc, J, path=cfg.disc["basis"])
    coup = compute_coupling(basis, model, disc.ygrid_full(model.R), disc, J, convention=DUAL)
    return Pipeline(model, disc, basis, coup, assemble(coup, model, disc, J))


def initial_slow_profile(y, R):
    """Smooth, off-centre a_0 start vanishing at y = +-R."""
    y = np.asarray(y, dtype=float)
    return np.exp(-(y - 0.5) ** 2 / 0.5) * np.cos(np.pi * y / (2 * R))


def fast_slow_point(cfg, eps, J, ny, T, n_times=401):
    """Fast residual and slow error of the truncated system at one eps.

    The start lies on {a_j = 0, j >= 1}.  The residual is
    sup over t in [5 eps, T] of sum_{j>=1} |a_j(t)|; the slow error is
    sup_t |a_0(t) - a_0^0(t)| against the J = 0 limit system.  Both are
    returned in the discrete H^2 norm (the headline value) and in L^2.
    Time stepping is exact (matrix exponential) so only the y grid enters.
    """
    p = build_pipeline(cfg, eps, J, ny=ny)
    sys = p.system
    lim = assemble(p.coupling, p.model, p.disc, J=0)
    a = np.zeros((J + 1, sys.ny))
    a[0] = initial_slow_profile(sys.y, sys.R)
    times = np.linspace(0.0, T, n_times)
    tr = propagate_exact(sys, a, times)
    tr0 = propagate_exact(lim, a[:1], times)
    late = times >= 5 * eps
    res_h2 = max(sum(h2_norm(r, sys.dy) for r in st[1:]) for st in tr[late])
    res_l2 = max(sum(l2_norm(r, sys.dy) for r in st[1:]) for st in tr[late])
    d = tr[:, 0] - tr0[:, 0]
    slow_h2 = max(h2_norm(r, sys.dy) for r in d)
    slow_l2 = max(l2_norm(r, sys.dy) for r in d)
    return {"fast_residual": res_h2, "slow_error": slow_h2,
            "fast_residual_L2": res_l2, "slow_error_L2": slow_l2}


def manifold_ny(eps, zeta, ny_min=127, prefactor=1.0):
    """Grid size holding every slow sine mode plus as many fast ones."""
    k0 = select_k0(zeta, 1.0, prefactor)
    ny = max(2 * k0 + 1, ny_min)
    return ny + (ny % 2 == 0)


def manifold_point(cfg, eps, J, ny=None, require_gap=None):
    """Lyapunov-Perron graph at eps = zeta and its distance from the critical set."""
    zeta = cfg.zeta(eps) if cfg.splitting["zeta"] is not None else eps
    pref = 1.0 if not cfg.splitting["diffusion_prefactor"] else 0.5 * cfg.model["sigma2"] ** 2
    if ny is None:
        ny = manifold_ny(eps, zeta, prefactor=pref)
    p = build_pipeline(cfg, eps, J, ny=ny)
    lam_min = float(p.system.relax[1:].mean(axis=1).min() * eps)
    split = make_split(zeta, lam_min, ny, prefactor=pref)
    if require_gap is None:
        require_gap = cfg.manifold["require_gap"]
    g = lyapunov_perron(p.system, split, cfg.manifold["lp_tol"], cfg.manifold["max_iter"],
                        require_gap=require_gap)
    out = {"manifold_distance": manifold_distance(g, p.system), "k0": split.k0, "ny": ny,
           "iterations": g.iterate_count, "contraction": g.contraction_estimate}
    if g.gap is not None:
        out["L_spec"] = g.gap.L_spec
    return out, g, p


def galerkin_errors(cfg, eps, J_list, J_ref=12, T=0.5, ny=None, X=12.0, nx=481):
    """Density-space L^2 error of each truncation against the J_ref solution at T.

    The start is the cosine-Gaussian density expanded to J_ref terms; each
    lower truncation keeps the leading coefficients.  Time stepping is exact.
    """
    p = build_pipeline(cfg, eps, J_ref, ny=ny, X=X)
    disc = Discretization(X=X, nx=nx, ny=p.disc.ny, quad_nodes=p.disc.quad_nodes)
    x, yf = disc.xgrid(), disc.ygrid_full(p.model.R)
    rho0 = cosine_gaussian_density(x, yf, p.model.R)
    a0 = decompose_density(rho0, p.basis, x, yf, J_ref).a
    ref = propagate_exact(p.system, a0, np.array([0.0, T]))[-1]
    ref_field = reconstruct_density(CoefficientState(T, ref), p.basis, x, yf)
    out = []
    for J in J_list:
        sysJ = assemble(p.coupling, p.model, p.disc, J=J)
        aJ = propagate_exact(sysJ, a0[:J + 1], np.array([0.0, T]))[-1]
        fJ = reconstruct_density(CoefficientState(T, aJ), p.basis, x, yf)
        out.append(density_error(ref_field, fJ)[1])
    return np.array(out)


def galerkin_self_error(cfg, eps, J_ref=12, T=0.5, ny=None, X=12.0, nx=481):
    """L^2 change of the J_ref density at T when the y grid is refined (ny -> 2 ny + 1)."""
    ny = ny or cfg.disc["ny"]
    fields = []
    for n in (ny, 2 * ny + 1):
        p = build_pipeline(cfg, eps, J_ref, ny=n, X=X)
        disc = Discretization(X=X, nx=nx, ny=n, quad_nodes=p.disc.quad_nodes)
        x, yf = disc.xgrid(), disc.ygrid_full(p.model.R)
        a0 = decompose_density(cosine_gaussian_density(x, yf, p.model.R), p.basis, x, yf,
                               J_ref).a
        aT = propagate_exact(p.system, a0, np.array([0.0, T]))[-1]
        fields.append(reconstruct_density(CoefficientState(T, aT), p.basis, x, yf))
    coarse, fine = fields
    fine = type(fine)(T, coarse.x, coarse.y, fine.values[:, ::2])
    return density_error(coarse, fine)[1]


def gap_table(eps_list, J_max, C=1.0, L_G=1.0, form="full"):
    """Boundary J*(eps) of the ok-region for L_Fj = C j^2 and lambda_j = j."""
    return gap_boundary(eps_list, J_max, lambda j: C * j * j, L_G, float, form=form)


# ---------------------------------------------------------------------------
# sweeps

def _run_point(args):
    kind, cfg, eps, J, kw = args
    try:
        if kind == "fast_slow":
            return fast_slow_point(cfg, eps, J, **kw), ""
        if kind == "manifold":
            return manifold_point(cfg, eps, J, **kw)[0], ""
        raise ValueError(kind)
    except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _map(fn, jobs, workers):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


@dataclass
class SweepResult:
    fits: dict
    tables: dict
    floors: dict
    failures: list


def run_sweep(plan):
    """Run every requested quantity, persist per-point CSVs and fit log-log slopes.

    Per-point failures are recorded and do not stop the sweep.  A quantity
    whose fit has too few usable points maps to a :class:`FitUnavailable`
    instance in ``fits``.
    """
    cfg = plan.config
    os.makedirs(plan.out_dir, exist_ok=True)
    sw = cfg.sweep
    ny, T = sw["ny"], sw["T"]
    ffac = cfg.acceptance["floor_factor"]
    fits, tables, floors, failures = {}, {}, {}, []
    qs = list(plan.quantities)

    if {"fast_residual", "slow_error"} & set(qs):
        for J in plan.J_list:
            jobs = [("fast_slow", cfg, e, J, {"ny": ny, "T": T}) for e in plan.eps_list]
            # grid self-error at the smallest eps, measured once
            jobs.append(("fast_slow", cfg, plan.eps_list[-1], J, {"ny": 2 * ny + 1, "T": T}))
            res = _map(_run_point, jobs, plan.workers)
            fine = res.pop()[0]
            for q in ("fast_residual", "slow_error"):
                if q not in qs:
                    continue
                vals = [r[q] if r else float("nan") for r, _ in res]
                coarse = res[-1][0]
                floor = ffac * abs(coarse[q] - fine[q]) if coarse and fine else 0.0
                floors[(q, J)] = floor
                rows = []
                for e, (r, msg) in zip(plan.eps_list, res):
                    rows.append((e, J, r[q] if r else float("nan"),
                                 r[q + "_L2"] if r else float("nan"), msg))
                    if msg:
                        failures.append((q, e, J, msg))
                write_csv(os.path.join(plan.out_dir, f"{q}_J{J}.csv"),
                          ["eps", "J", "H2", "L2", "error"], rows)
                tables[(q, J)] = rows
                try:
                    fits[(q, J)] = fit_rate(plan.eps_list, vals, floor)
                except FitUnavailable as exc:
                    fits[(q, J)] = exc

    if "manifold_distance" in qs:
        J = cfg.manifold["J"]
        elist = list(plan.manifold_eps_list)
        res = _map(_run_point, [("manifold", cfg, e, J, {}) for e in elist], plan.workers)
        # grid self-error at the cheapest point
        e0 = elist[0]
        r0 = res[0][0]
        floor = 0.0
        if r0:
            rf, _ = _run_point(("manifold", cfg, e0, J, {"ny": 2 * r0["ny"] + 1}))
            if rf:
                floor = ffac * abs(r0["manifold_distance"] - rf["manifold_distance"])
        floors[("manifold_distance", J)] = floor
        rows = []
        for e, (r, msg) in zip(elist, res):
            if msg:
                failures.append(("manifold_distance", e, J, msg))
            rows.append((e, J, r["manifold_distance"] if r else float("nan"),
                         r["k0"] if r else -1, r["ny"] if r else -1,
                         r.get("L_spec", float("nan")) if r else float("nan"), msg))
        write_csv(os.path.join(plan.out_dir, f"manifold_distance_J{J}.csv"),
                  ["eps", "J", "distance", "k0", "ny", "L_spec", "error"], rows)
        tables[("manifold_distance", J)] = rows
        vals = [r[2] for r in rows]
        try:
            fits[("manifold_distance", J)] = fit_rate(elist, vals, floor)
        except FitUnavailable as exc:
            fits[("manifold_distance", J)] = exc

    if "galerkin_error" in qs:
        eps = plan.eps_list[0]
        Js = sorted(plan.J_list)
        errs = galerkin_errors(cfg, eps, Js, T=T)
        floor = ffac * galerkin_self_error(cfg, eps, T=T)
        floors[("galerkin_error", None)] = floor
        rows = [(eps, J, e) for J, e in zip(Js, errs)]
        write_csv(os.path.join(plan.out_dir, "galerkin_error.csv"), ["eps", "J", "L2"], rows)
        tables[("galerkin_error", None)] = rows

    if "gap_ok" in qs:
        geps = np.asarray(sw["gap_eps_list"], dtype=float)
        Jmax = sw["J_max"]
        rows = []
        for form in ("full", "simplified"):
            b = gap_table(geps, Jmax, C=sw["gap_C"], L_G=sw["gap_L_G"], form=form)
            rows += [(form, e, int(j)) for e, j in zip(geps, b)]
            ok = (b > 0) & (b < Jmax)
            try:
                fits[("gap_ok", form)] = fit_rate(geps[ok], b[ok].astype(float))
            except FitUnavailable as exc:
                fits[("gap_ok", form)] = exc
        write_csv(os.path.join(plan.out_dir, "gap_boundary.csv"), ["form", "eps", "J_star"], rows)
        tables[("gap_ok", None)] = rows

    frows = []
    for key, f in fits.items():
        q, tag = key
        if isinstance(f, RateFit):
            frows.append((q, tag, f.slope, f.intercept, f.r2, len(f.points), ""))
        else:
            frows.append((q, tag, float("nan"), float("nan"), float("nan"), 0, str(f)))
    write_csv(os.path.join(plan.out_dir, "fits.csv"),
              ["quantity", "tag", "slope", "intercept", "r2", "n_points", "error"], frows)
    return SweepResult(fits, tables, floors, failures)


def plan_from_config(cfg, out_dir=None, quantities=None):
    sw = cfg.sweep
    return SweepPlan(list(sw["eps_list"]), list(sw["J_list"]),
                     list(quantities or sw["quantities"]), cfg, out_dir or sw["out"],
                     seed=sw["seed"], workers=sw["workers"],
                     manifold_eps_list=list(sw["manifold_eps_list"]))


# ---------------------------------------------------------------------------
# end-to-end example

FAST_OVERRIDES = {
    "ny": 199,
    "J_list": [4],
    "manifold_eps_list": [1e-4, 10 ** -4.25, 10 ** -4.5, 10 ** -4.75],
}


def reproduce_paper_example(cfg, out_dir, fast=False):
    """Run the linear OU pipeline end to end and write a summary CSV.

    Returns (all_passed, summary rows).  Each row is
    (check, value, target, tolerance, passed).
    """
    from .stationary import stationary_density
    from .splitting import estimate_lipschitz, spectral_gap

    os.makedirs(out_dir, exist_ok=True)
    acc = cfg.acceptance
    sw = dict(cfg.sweep)
    if fast:
        sw.update({k: v for k, v in FAST_OVERRIDES.items() if k != "manifold_eps_list"})
    run_cfg = RunConfig(dict(cfg.model), dict(cfg.disc), dict(cfg.splitting),
                        dict(cfg.manifold), sw, dict(acc))
    with open(os.path.join(out_dir, "config.cfg"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(run_cfg))
    model = run_cfg.build_model()
    disc = run_cfg.build_disc()

    ps = stationary_density(model, 0.0, disc)
    write_csv(os.path.join(out_dir, "ps.csv"), ["x", "ps"], zip(ps.x, ps.values))

    J = max(sw["J_list"])
    basis = make_basis(model, disc, J, path=run_cfg.disc["basis"])
    write_csv(os.path.join(out_dir, "basis.csv"), ["j", "lambda", "Cjj"],
              [(j, float(basis.lambdas[j]), float(basis.norms[j])) for j in range(J + 1)])

    ys = np.array([-1.0, 0.0, 1.0])
    c = compute_coupling(basis, model, ys, disc, J)
    rows = []
    for name in ("Gkj", "Gtil", "Dkj", "Dtil"):
        arr = getattr(c, name)
        for k in range(J + 1):
            for j in range(J + 1):
                for n, y in enumerate(ys):
                    rows.append((name, k, j, y, arr[k, j, n]))
    write_csv(os.path.join(out_dir, "coupling.csv"), ["tensor", "k", "j", "y", "value"], rows)

    summary = []
    p = build_pipeline(run_cfg, model.epsilon, cfg.manifold["J"], ny=sw["ny"])
    LF, LG = estimate_lipschitz(p.system)
    split = make_split(model.epsilon, 1.0, p.system.ny)
    gr = spectral_gap(model.epsilon, model.epsilon, split, np.arange(1, len(LF) + 1), LF, LG)
    write_csv(os.path.join(out_dir, "gap.csv"), ["key", "value"],
              [("eps", gr.eps), ("zeta", gr.zeta), ("k0", gr.k0), ("L_spec", gr.L_spec),
               ("L_simplified", gr.L_simplified), ("L_G", gr.lipschitz_G), ("ok", gr.ok)]
              + [(f"L_F{j + 1}", v) for j, v in enumerate(gr.lipschitz_F)])

    plan = SweepPlan(list(sw["eps_list"]), list(sw["J_list"]),
                     ["fast_residual", "slow_error", "manifold_distance", "gap_ok"], run_cfg,
                     os.path.join(out_dir, "sweep"), seed=sw["seed"], workers=sw["workers"],
                     manifold_eps_list=(FAST_OVERRIDES["manifold_eps_list"] if fast
                                        else list(sw["manifold_eps_list"])))
    res = run_sweep(plan)
    targets = {"fast_residual": ("slow_slope", "slow_slope_tol"),
               "slow_error": ("slow_slope", "slow_slope_tol"),
               "manifold_distance": ("manifold_slope", "manifold_slope_tol")}
    for (q, tag), f in res.fits.items():
        if q == "gap_ok":
            if tag != "full":
                continue
            tgt, tol = acc["gap_slope"], acc["gap_slope_tol"]
        else:
            tgt, tol = (acc[k] for k in targets[q])
        if isinstance(f, RateFit):
            summary.append((f"{q}[{tag}] slope", f.slope, tgt, tol, f.within(tgt, tol)))
        else:
            summary.append((f"{q}[{tag}] slope", float("nan"), tgt, tol, False))
    write_csv(os.path.join(out_dir, "summary.csv"),
              ["check", "value", "target", "tolerance", "passed"], summary)
    return all(r[4] for r in summary), summary
