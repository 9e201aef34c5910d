"""Brute-force oracles: a full 2D Fokker-Planck solver and Euler-Maruyama sampling."""

from .fullpde import FullFpeSolver, FullFpeState, solve_full_fpe, compare_reduction
from .montecarlo import (McEnsemble, cosine_gaussian_density, cosine_gaussian_init,
                         euler_maruyama, histogram_density, keyed_normals, keyed_uniforms)

__all__ = ["FullFpeSolver", "FullFpeState", "solve_full_fpe", "compare_reduction",
           "McEnsemble", "cosine_gaussian_density", "cosine_gaussian_init", "euler_maruyama",
           "histogram_density", "keyed_normals", "keyed_uniforms"]
