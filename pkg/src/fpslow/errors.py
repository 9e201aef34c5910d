"""Exception hierarchy shared across the package.

Every numerical failure derives from :class:`NumericalError` so the CLI can
map it to exit status 1 with a structured message.
"""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical contract."""


class InvalidModel(NumericalError):
    def __init__(self, field, detail=""):
        self.field = field
        self.detail = detail
        msg = f"invalid model field {field!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NoRootBracketed(NumericalError):
    pass


class TailMassExceeded(NumericalError):
    pass


class UnsupportedModel(NumericalError):
    pass


class SpectrumViolation(NumericalError):
    pass


class ComplexPairUnsupported(NumericalError):
    pass


class QuadratureDivergence(NumericalError):
    pass


class StepUnstable(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class InvalidSplit(NumericalError):
    pass


class GapConditionViolated(NumericalError):
    pass


class NoContraction(NumericalError):
    pass


class HorizonTooShort(NumericalError):
    pass


class GridMismatch(NumericalError):
    pass


class MassAnomaly(NumericalError):
    pass


class FitUnavailable(NumericalError):
    pass


class ConfigError(ValueError):
    """Malformed configuration; mapped to a usage error by the CLI."""
