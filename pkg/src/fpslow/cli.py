"""Command line entry point ``fpe``.

Exit codes: 0 success, 1 numerical failure or failed gate, 2 usage error.
"""

import argparse
import os
import sys

import numpy as np

from . import harness
from .coefsys import CoefficientState, assemble, h2_norm, integrate, l2_norm
from .config import load_config
from .coupling import DUAL, compute_coupling
from .csvio import read_columns, read_csv, write_columns, write_csv
from .eigenbasis import make_basis
from .errors import ConfigError, GridMismatch, NumericalError
from .reconstruct import decompose_density, reconstruct_density
from .reference.fullpde import FullFpeState, compare_reduction, solve_full_fpe
from .reference.montecarlo import (cosine_gaussian_density, cosine_gaussian_init,
                                   euler_maruyama, histogram_density)
from .slowmanifold import SlowManifoldGraph, propagate_exact, reduced_integrate, sine_system
from .splitting import estimate_lipschitz, make_split, spectral_gap
from .stationary import stationary_density


def _cfg(args):
    return load_config(args.config) if getattr(args, "config", None) else load_config()


def _model_disc(args, cfg, eps=None):
    model = cfg.build_model(eps)
    disc = cfg.build_disc()
    return model, disc


def _write_field(path, x, y, rho):
    X, Y = np.meshgrid(x, y, indexing="ij")
    write_columns(path, {"x": X.ravel(), "y": Y.ravel(), "rho": rho.ravel()})


def _read_field(path):
    c = read_columns(path)
    x = np.unique(c["x"])
    y = np.unique(c["y"])
    return x, y, c["rho"].reshape(x.size, y.size)


def _initial_density(model, disc, basis, J_proj):
    x, yf = disc.xgrid(), disc.ygrid_full(model.R)
    rho = cosine_gaussian_density(x, yf, model.R)
    a = decompose_density(rho, basis, x, yf, J_proj)
    return a, reconstruct_density(a, basis, x, yf).values


# ---------------------------------------------------------------------------

def cmd_stationary(args):
    cfg = _cfg(args)
    model, disc = _model_disc(args, cfg)
    ps = stationary_density(model, args.y, disc)
    write_csv(args.out, ["x", "ps"], zip(ps.x, ps.values))
    return 0


def cmd_eigenbasis(args):
    cfg = _cfg(args)
    model, disc = _model_disc(args, cfg)
    b = make_basis(model, disc, args.J, path=cfg.disc["basis"])
    write_csv(args.out, ["j", "lambda", "Cjj"],
              [(j, float(b.lambdas[j]), float(b.norms[j])) for j in range(args.J + 1)])
    if args.dump_grid:
        x = disc.xgrid()
        stem = os.path.splitext(args.out)[0]
        cols = {"x": x}
        for j in range(args.J + 1):
            cols[f"phi{j}"] = np.asarray(b.eval(j, args.y, x)) * np.ones_like(x)
        write_columns(f"{stem}_grid.csv", cols)
    return 0


def cmd_coupling(args):
    cfg = _cfg(args)
    model, disc = _model_disc(args, cfg)
    b = make_basis(model, disc, args.J, path=cfg.disc["basis"])
    ys = np.array(args.y if args.y else [-1.0, 0.0, 1.0], dtype=float)
    c = compute_coupling(b, model, ys, disc, args.J, convention=args.convention)
    rows = [("C0", 0, 0, y, c.C0) for y in ys]
    for i in range(args.J + 1):
        rows += [("G", i, 0, y, c.G[i, n]) for n, y in enumerate(ys)]
    for name in ("Gkj", "Gtil", "Dkj", "Dtil"):
        arr = getattr(c, name)
        for k in range(args.J + 1):
            for j in range(args.J + 1):
                rows += [(name, k, j, y, arr[k, j, n]) for n, y in enumerate(ys)]
    write_csv(args.out, ["tensor", "k", "j", "y", "value"], rows)
    return 0


def _coef_setup(cfg, J, eps=None, J_proj=None):
    model, disc = cfg.build_model(eps), cfg.build_disc()
    Jb = max(J, J_proj or J)
    basis = make_basis(model, disc, Jb, path=cfg.disc["basis"])
    coup = compute_coupling(basis, model, disc.ygrid_full(model.R), disc, Jb, convention=DUAL)
    return model, disc, basis, coup


def cmd_solve_coef(args):
    cfg = _cfg(args)
    model, disc, basis, coup = _coef_setup(cfg, args.J)
    sys_ = assemble(coup, model, disc, args.J)
    a0, _ = _initial_density(model, disc, basis, args.J)
    state0 = CoefficientState(0.0, a0.a)
    n = max(args.snapshots, 1)
    if args.exact:
        times = np.linspace(0.0, args.T, n + 1)
        traj = propagate_exact(sys_, state0.a, times)
        snaps = [CoefficientState(float(t), a) for t, a in zip(times, traj)]
        tn = times
        l2 = np.array([[l2_norm(r, sys_.dy) for r in a] for a in traj])
        h2 = np.array([[h2_norm(r, sys_.dy) for r in a] for a in traj])
    else:
        dt = cfg.disc["dt"] or sys_.default_dt()
        tr = integrate(sys_, state0, args.T, dt=dt, n_snapshots=n)
        snaps, tn, l2, h2 = tr.snapshots, tr.times, tr.l2, tr.h2
    os.makedirs(args.out, exist_ok=True)
    yf = disc.ygrid_full(model.R)
    index = []
    for k, st in enumerate(snaps):
        name = f"snapshot_{k:04d}.csv"
        full = st.full()
        cols = {"y": yf}
        cols.update({f"a{j}": full[j] for j in range(args.J + 1)})
        write_columns(os.path.join(args.out, name), cols)
        index.append((k, st.t, name))
    write_csv(os.path.join(args.out, "snapshots.csv"), ["k", "t", "file"], index)
    cols = {"t": tn}
    cols.update({f"L2_a{j}": l2[:, j] for j in range(args.J + 1)})
    cols.update({f"H2_a{j}": h2[:, j] for j in range(args.J + 1)})
    write_columns(os.path.join(args.out, "norms.csv"), cols)
    return 0


def cmd_solve_full(args):
    cfg = _cfg(args)
    model, disc, basis, _ = _coef_setup(cfg, args.project)
    _, rho0 = _initial_density(model, disc, basis, args.project)
    dt = args.dt or cfg.disc["dt"] or 0.01 * model.epsilon
    states = solve_full_fpe(model, disc, rho0, args.T, dt=dt, n_snapshots=max(args.snapshots, 1),
                            richardson=args.richardson)
    os.makedirs(args.out, exist_ok=True)
    x, yf = disc.xgrid(), disc.ygrid_full(model.R)
    index = []
    for k, st in enumerate(states):
        name = f"rho_{k:04d}.csv"
        _write_field(os.path.join(args.out, name), x, yf, st.rho)
        index.append((k, st.t, name))
    write_csv(os.path.join(args.out, "snapshots.csv"), ["k", "t", "file"], index)
    return 0


def cmd_mc(args):
    cfg = _cfg(args)
    model, disc = _model_disc(args, cfg)
    dt = args.dt_sde or model.epsilon / 20
    ens = euler_maruyama(model, args.paths, args.T, dt, args.seed, cosine_gaussian_init(model.R),
                         snapshot_times=[args.T], x_nodes=disc.xgrid(),
                         y_nodes=disc.ygrid_full(model.R), chunk=args.chunk)
    os.makedirs(args.out, exist_ok=True)
    index = []
    for k, (t, counts) in enumerate(ens.histograms):
        name = f"hist_{k:04d}.csv"
        _write_field(os.path.join(args.out, name), disc.xgrid(), disc.ygrid_full(model.R),
                     histogram_density(ens, counts))
        index.append((k, t, name))
    write_csv(os.path.join(args.out, "snapshots.csv"), ["k", "t", "file"], index)
    write_csv(os.path.join(args.out, "absorbed.csv"), ["n_paths", "absorbed", "seed", "dt_sde"],
              [(ens.n_paths, ens.absorbed, ens.seed, ens.dt_sde)])
    return 0


def _basis_from_csv(cfg, path):
    c = read_columns(path)
    J = int(c["j"].max())
    model, disc = cfg.build_model(), cfg.build_disc()
    basis = make_basis(model, disc, J, path=cfg.disc["basis"])
    if not np.allclose(basis.lambdas[:J + 1], c["lambda"], rtol=1e-6, atol=1e-9):
        raise GridMismatch("basis file does not match the configured model")
    return model, disc, basis, J


def _read_traj(path):
    _, rows = read_csv(os.path.join(path, "snapshots.csv"))
    out = []
    for k, t, name in rows:
        c = read_columns(os.path.join(path, name))
        J = sum(1 for h in c if h.startswith("a")) - 1
        a = np.vstack([c[f"a{j}"] for j in range(J + 1)])[:, 1:-1]
        out.append(CoefficientState(float(t), a))
    return out


def cmd_compare(args):
    cfg = _cfg(args)
    model, disc, basis, _ = _basis_from_csv(cfg, args.basis)
    coef = _read_traj(args.traj)
    _, rows = read_csv(os.path.join(args.full, "snapshots.csv"))
    full = []
    x = yf = None
    for k, t, name in rows:
        x, yf, rho = _read_field(os.path.join(args.full, name))
        full.append(FullFpeState(float(t), rho))
    if len(full) != len(coef):
        raise GridMismatch(f"{len(full)} full snapshots vs {len(coef)} coefficient snapshots")
    errs = compare_reduction(full, coef, basis, x, yf)
    write_csv(args.out, ["t", "L1", "L2", "Linf", "marginal_L2"], errs)
    return 0


def cmd_reconstruct(args):
    cfg = _cfg(args)
    model, disc, basis, _ = _basis_from_csv(cfg, args.basis)
    x, yf = disc.xgrid(), disc.ygrid_full(model.R)
    os.makedirs(args.out, exist_ok=True)
    index = []
    for k, st in enumerate(_read_traj(args.traj)):
        f = reconstruct_density(st, basis, x, yf)
        name = f"density_{k:04d}.csv"
        _write_field(os.path.join(args.out, name), x, yf, f.values)
        index.append((k, st.t, name))
    write_csv(os.path.join(args.out, "snapshots.csv"), ["k", "t", "file"], index)
    return 0


def _manifold_cfg(cfg, args):
    if args.zeta is not None:
        cfg.splitting["zeta"] = args.zeta
    if args.J is not None:
        cfg.manifold["J"] = args.J
    return cfg


def cmd_manifold(args):
    cfg = _manifold_cfg(_cfg(args), args)
    eps = args.eps if args.eps is not None else cfg.model["epsilon"]
    info, g, p = harness.manifold_point(cfg, eps, cfg.manifold["J"], ny=args.ny)
    ss, ns = g.sine, g.n_slow
    resp = ss.to_grid(np.vstack([np.zeros((ns, ns)), g.H]))   # (J+1, ny, ns)
    rows = []
    for j in range(resp.shape[0]):
        for i in range(ss.ny):
            rows.append((j, i, p.system.y[i], *resp[j, i]))
    write_csv(args.out, ["component", "index", "y"] + [f"s{k + 1}" for k in range(ns)], rows)
    meta = [("eps", eps), ("zeta", g.gap.zeta if g.gap else eps), ("J", cfg.manifold["J"]),
            ("ny", ss.ny), ("k0", g.k0), ("iterations", g.iterate_count),
            ("contraction", g.contraction_estimate), ("distance", info["manifold_distance"])]
    write_csv(_meta_path(args.out), ["key", "value"], meta)
    return 0


def _meta_path(path):
    return os.path.splitext(path)[0] + "_meta.csv"


def cmd_reduced(args):
    cfg = _cfg(args)
    _, rows = read_csv(_meta_path(args.graph))
    meta = {k: float(v) for k, v in rows}
    J, ny = int(meta["J"]), int(meta["ny"])
    p = harness.build_pipeline(cfg, meta["eps"], J, ny=ny)
    ss = sine_system(p.system)
    c = read_columns(args.graph)
    ns = sum(1 for h in c if h.startswith("s") and h[1:].isdigit())
    resp = np.stack([c[f"s{k + 1}"] for k in range(ns)], axis=-1).reshape(J + 1, ny, ns)
    H = np.column_stack([ss.to_sine(resp[:, :, k])[ns:] for k in range(ns)])
    g = SlowManifoldGraph(H, ss, int(meta["k0"]), 0, 0.0, [])
    a0 = harness.initial_slow_profile(p.system.y, p.system.R)
    s0 = g.slow_coordinates(a0)
    dt = args.dt or 0.1 * meta["eps"]
    t, s = reduced_integrate(g, s0, args.T, dt)
    cols = {"t": t}
    cols.update({f"s{k + 1}": s[:, k] for k in range(ns)})
    write_columns(args.out, cols)
    return 0


def cmd_check_gap(args):
    cfg = _cfg(args)
    eps = args.eps if args.eps is not None else cfg.model["epsilon"]
    zeta = args.zeta if args.zeta is not None else (cfg.splitting["zeta"] or eps)
    J = args.J if args.J is not None else cfg.manifold["J"]
    pref = 0.5 * cfg.model["sigma2"] ** 2 if cfg.splitting["diffusion_prefactor"] else 1.0
    ny = args.ny or cfg.disc["ny"]
    p = harness.build_pipeline(cfg, eps, J, ny=ny)
    LF, LG = estimate_lipschitz(p.system)
    lam = p.system.relax[1:].mean(axis=1) * eps
    split = make_split(zeta, float(lam.min()), max(ny, 3), prefactor=pref)
    r = spectral_gap(eps, zeta, split, lam, LF, LG)
    lines = [("eps", r.eps), ("zeta", r.zeta), ("k0", r.k0), ("NS", split.NS), ("NF", split.NF),
             ("L_spec", r.L_spec), ("L_simplified", r.L_simplified),
             ("term_fast", r.terms[0]), ("term_gap_sqrt", r.terms[1]), ("term_gap", r.terms[2]),
             ("L_G", r.lipschitz_G)]
    lines += [(f"L_F{j + 1}", v) for j, v in enumerate(r.lipschitz_F)]
    lines.append(("ok", "true" if r.ok else "false"))
    for k, v in lines:
        print(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    return 0 if r.ok else 1


def cmd_sweep(args):
    cfg = _cfg(args)
    if args.workers is not None:
        cfg.sweep["workers"] = args.workers
    plan = harness.plan_from_config(cfg, args.out, args.quantities)
    res = harness.run_sweep(plan)
    for (q, tag), f in res.fits.items():
        if isinstance(f, harness.RateFit):
            print(f"{q}[{tag}] slope = {f.slope!r} r2 = {f.r2!r}")
        else:
            print(f"{q}[{tag}] unavailable: {f}")
    for q, e, J, msg in res.failures:
        print(f"failed {q} eps={e!r} J={J}: {msg}", file=sys.stderr)
    return 0


def cmd_reproduce(args):
    cfg = _cfg(args)
    if args.seed is not None:
        cfg.sweep["seed"] = args.seed
    ok, summary = harness.reproduce_paper_example(cfg, args.out, fast=args.fast)
    for name, value, target, tol, passed in summary:
        print(f"{'PASS' if passed else 'FAIL'} {name} = {value!r} (target {target!r} +- {tol!r})")
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="fpe", description="Fast-slow Fokker-Planck reduction tools")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="run configuration file (INI)")
        p.set_defaults(func=fn)
        return p

    p = add("stationary", cmd_stationary, "stationary fast density at a frozen y")
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = add("eigenbasis", cmd_eigenbasis, "fast eigenvalues and norms")
    p.add_argument("--J", type=int, default=8)
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--dump-grid", action="store_true")
    p.add_argument("--out", required=True)

    p = add("coupling", cmd_coupling, "coupling tensors in long format")
    p.add_argument("--J", type=int, default=4)
    p.add_argument("--y", type=float, nargs="*")
    p.add_argument("--convention", choices=["dual", "plain"], default="dual")
    p.add_argument("--out", required=True)

    p = add("solve-coef", cmd_solve_coef, "integrate the truncated coefficient system")
    p.add_argument("--J", type=int, default=4)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--snapshots", type=int, default=10)
    p.add_argument("--exact", action="store_true", help="matrix-exponential time stepping")
    p.add_argument("--out", required=True)

    p = add("solve-full", cmd_solve_full, "reference solver for the full equation")
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--dt", type=float)
    p.add_argument("--snapshots", type=int, default=1)
    p.add_argument("--project", type=int, default=12,
                   help="expand the initial density to this many modes first")
    p.add_argument("--richardson", action="store_true")
    p.add_argument("--out", required=True)

    p = add("mc", cmd_mc, "Euler-Maruyama ensemble and histograms")
    p.add_argument("--paths", type=int, default=200000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--dt-sde", type=float)
    p.add_argument("--chunk", type=int)
    p.add_argument("--out", required=True)

    p = add("manifold", cmd_manifold, "Lyapunov-Perron slow manifold graph")
    p.add_argument("--J", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--zeta", type=float)
    p.add_argument("--ny", type=int)
    p.add_argument("--out", required=True)

    p = add("reduced", cmd_reduced, "integrate the reduced slow dynamics on a stored graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float)
    p.add_argument("--out", required=True)

    p = add("check-gap", cmd_check_gap, "evaluate the spectral gap functional")
    p.add_argument("--J", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--zeta", type=float)
    p.add_argument("--ny", type=int)

    p = add("compare", cmd_compare, "full solution vs reconstructed truncation")
    p.add_argument("--full", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--out", required=True)

    p = add("reconstruct", cmd_reconstruct, "densities from a coefficient trajectory")
    p.add_argument("--traj", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--out", required=True)

    p = add("sweep", cmd_sweep, "eps sweeps and rate fits")
    p.add_argument("--quantities", nargs="*", choices=list(harness.QUANTITIES))
    p.add_argument("--workers", type=int)
    p.add_argument("--out")

    p = add("reproduce-paper-example", cmd_reproduce, "end-to-end linear OU pipeline")
    p.add_argument("--fast", action="store_true", help="coarse grids")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="paper_example")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)          # exits 2 on usage errors
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"fpe: usage error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"fpe: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
