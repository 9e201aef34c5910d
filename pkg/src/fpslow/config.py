"""Run configuration: an INI file with sections [model] [disc] [splitting]
[manifold] [sweep] [acceptance].

Every key has a default, so an empty file describes the linear OU fixture.
Unknown sections or keys are rejected to catch typos early.
"""

import configparser
import io
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import Discretization, SdeModel

DEFAULTS = {
    "model": {
        "kind": "OrnsteinUhlenbeck",
        "f": "ou_linear",
        "g": "ou_linear",
        "sigma1": repr(math.sqrt(2.0)),
        "sigma2": repr(math.sqrt(2.0)),
        "epsilon": "0.01",
        "R": "2.0",
    },
    "disc": {
        "X": "8.0",
        "nx": "801",
        "ny": "79",
        "dt": "",
        "quad_nodes": "64",
        "basis": "auto",
    },
    "splitting": {
        "zeta": "",
        "diffusion_prefactor": "false",
    },
    "manifold": {
        "J": "2",
        "lp_tol": "1e-8",
        "max_iter": "200",
        "require_gap": "true",
        "offset_scale": "0.1",
    },
    "sweep": {
        "eps_list": "1e-2, 3.1622776601683794e-3, 1e-3, 3.1622776601683794e-4",
        "manifold_eps_list": "1e-4, 3.1622776601683795e-5, 1e-5, 3.1622776601683795e-6",
        "J_list": "6",
        "gap_eps_list": ("1e-2, 0.0031622776601683794, 1e-3, 0.00031622776601683794, 1e-4, "
                         "3.1622776601683795e-05, 1e-5, 3.162277660168379e-06, 1e-6, "
                         "3.162277660168379e-07, 1e-7, 3.162277660168379e-08, 1e-8"),
        "J_max": "1000",
        "gap_C": "1.0",
        "gap_L_G": "1.0",
        "quantities": "fast_residual, slow_error, manifold_distance, galerkin_error, gap_ok",
        "T": "0.5",
        "ny": "399",
        "seed": "42",
        "workers": "1",
        "out": "sweep_out",
    },
    "acceptance": {
        "coupling_tol": "1e-8",
        "eigen_tol": "1e-3",
        "ortho_tol": "1e-6",
        "projection_tol": "1e-12",
        "generator_tol": "1e-6",
        "decay_rel_tol": "0.05",
        "slow_slope": "0.5",
        "slow_slope_tol": "0.15",
        "manifold_slope": "1.0",
        "manifold_slope_tol": "0.15",
        "gap_slope": "-0.16666666666666666",
        "gap_slope_tol": "0.05",
        "invariance_factor": "10.0",
        "attraction_fraction": "0.5",
        "mc_factor": "3.0",
        "galerkin_factor": "5.0",
        "floor_factor": "10.0",
    },
}


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    disc: dict = field(default_factory=dict)
    splitting: dict = field(default_factory=dict)
    manifold: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    acceptance: dict = field(default_factory=dict)

    def build_model(self, epsilon=None):
        m = self.model
        eps = float(m["epsilon"]) if epsilon is None else float(epsilon)
        return SdeModel.from_strings(m["f"], m["g"], m["sigma1"], m["sigma2"], eps, m["R"],
                                     kind=m["kind"])

    def build_disc(self, **overrides):
        d = dict(self.disc)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return Discretization(X=float(d["X"]), nx=int(d["nx"]), ny=int(d["ny"]),
                              dt=d["dt"], quad_nodes=int(d["quad_nodes"]))

    def zeta(self, epsilon=None):
        z = self.splitting["zeta"]
        if z is None:
            return float(self.model["epsilon"]) if epsilon is None else float(epsilon)
        return z


def _float_list(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _opt_float(text):
    return float(text) if text.strip() else None


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


PARSERS = {
    "model": {"kind": str.strip, "f": str.strip, "g": str.strip, "sigma1": float,
              "sigma2": float, "epsilon": float, "R": float},
    "disc": {"X": float, "nx": int, "ny": int, "dt": _opt_float, "quad_nodes": int,
             "basis": str.strip},
    "splitting": {"zeta": _opt_float, "diffusion_prefactor": _bool},
    "manifold": {"J": int, "lp_tol": float, "max_iter": int, "require_gap": _bool,
                 "offset_scale": float},
    "sweep": {"eps_list": _float_list, "manifold_eps_list": _float_list, "J_list": _int_list,
              "gap_eps_list": _float_list, "J_max": int, "gap_C": float, "gap_L_G": float,
              "quantities": lambda s: [q.strip() for q in s.split(",") if q.strip()],
              "T": float, "ny": int, "seed": int, "workers": int, "out": str.strip},
}


def _parse(section, key, text):
    fn = PARSERS.get(section, {}).get(key, float)
    try:
        return fn(text)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {text!r}: {exc}") from None


def load_config(path=None, text=None):
    """Read a run configuration from ``path`` (or a string) over the defaults."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    elif text is not None:
        cp.read_string(text)
    cfg = RunConfig()
    for section, keys in DEFAULTS.items():
        values = dict(keys)
        if cp.has_section(section):
            for k, v in cp.items(section):
                if k not in keys:
                    raise ConfigError(f"unknown key [{section}] {k}")
                values[k] = v
        setattr(cfg, section, {k: _parse(section, k, v) for k, v in values.items()})
    extra = set(cp.sections()) - set(DEFAULTS)
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    return cfg


def dump_config(cfg):
    """Text form of ``cfg`` that ``load_config`` reads back to the same values."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for section in DEFAULTS:
        cp.add_section(section)
        for k, v in getattr(cfg, section).items():
            if isinstance(v, list):
                v = ", ".join(repr(e) if isinstance(e, float) else str(e) for e in v)
            elif v is None:
                v = ""
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            cp.set(section, k, str(v))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
