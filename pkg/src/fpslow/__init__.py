"""Slow-manifold reduction of a fast-slow Fokker-Planck equation on a strip.

The fast variable is expanded in eigenfunctions of the frozen-y fast
operator; the resulting coefficient system is split into slow and fast
parts and reduced with a Lyapunov-Perron slow manifold.
"""

from .errors import (  # noqa: F401
    NumericalError, InvalidModel, NoRootBracketed, TailMassExceeded,
    UnsupportedModel, SpectrumViolation, ComplexPairUnsupported,
    QuadratureDivergence, StepUnstable, DegenerateDenominator, InvalidSplit,
    GapConditionViolated, NoContraction, HorizonTooShort, GridMismatch,
    MassAnomaly, FitUnavailable, ConfigError,
)
from .model import Discretization, SdeModel, linear_ou_model
from .config import RunConfig, load_config

__version__ = "0.1.0"
