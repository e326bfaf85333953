"""Exception hierarchy.

``ValidationError`` and its subclasses signal bad inputs (CLI exit code 1);
everything else derived from ``PmuSynthError`` is a runtime failure (exit 2).
"""


class PmuSynthError(Exception):
    """Base class for all package errors."""


class ValidationError(PmuSynthError, ValueError):
    """Input data or configuration violates a documented invariant."""


class ParseError(ValidationError):
    """A file could not be parsed."""


class ConfigurationError(ValidationError):
    """Configuration is inconsistent (e.g. overlapping period windows)."""


class DegenerateInputError(ValidationError):
    """Numerically degenerate input, such as a nonpositive scaling baseline."""


class CoverageError(PmuSynthError):
    """A series does not cover the instant it is needed at."""


class InfeasibleError(PmuSynthError):
    """No feasible solution exists (e.g. insufficient dispatchable capacity)."""


class PowerFlowError(PmuSynthError):
    """Power-flow failure such as a singular Jacobian or an islanded network."""


class TsbError(PmuSynthError):
    """Base class for tsb container errors."""


class TsbMagicError(TsbError):
    pass


class TsbVersionError(TsbError):
    pass


class TsbTruncatedError(TsbError):
    pass
