"""Exception types shared across the library.

Each error names the contract it enforces; callers and the CLI map them onto
reportable failure reasons rather than letting bare numpy errors escape.
"""

from __future__ import annotations

__all__ = [
    "QuotientEmError",
    "DimensionError",
    "DomainError",
    "ParameterError",
    "ConditioningError",
    "LayoutError",
    "CapacityError",
    "ChartError",
    "DegeneracyError",
    "CapabilityError",
    "LikelihoodUnderflowError",
    "PreconditionError",
    "InsufficientDataError",
    "SymmetryBreachError",
    "EmptySetError",
    "DivergenceError",
    "ConfigError",
]


class QuotientEmError(Exception):
    """Base class for library errors."""


class DimensionError(QuotientEmError):
    """Shapes of the inputs are incompatible."""


class DomainError(QuotientEmError):
    """Input violates a mathematical domain requirement (names the check)."""


class ParameterError(QuotientEmError):
    """Scalar parameter outside its admissible range."""


class ConditioningError(QuotientEmError):
    """Input is too close to singular for the requested factorization."""


class LayoutError(QuotientEmError):
    """Parameter vector does not match the declared layout."""


class CapacityError(QuotientEmError):
    """Finite-group enumeration guard exceeded."""


class ChartError(QuotientEmError):
    """Chosen chart index set has a near-singular minor."""


class DegeneracyError(QuotientEmError):
    """M-step produced a degenerate component."""


class CapabilityError(QuotientEmError):
    """Operation not supported for this model kind or mode."""


class LikelihoodUnderflowError(QuotientEmError):
    """All mixture components underflowed at some data point."""


class PreconditionError(QuotientEmError):
    """Caller violated a documented precondition."""


class InsufficientDataError(QuotientEmError):
    """Not enough qualifying iterations/samples for the estimate."""


class SymmetryBreachError(QuotientEmError):
    """A quantity that must be orbit-invariant failed its invariance recheck."""


class EmptySetError(QuotientEmError):
    """A set-valued estimate came back empty."""


class DivergenceError(QuotientEmError):
    """Numerical quadrature failed to Cauchy-converge."""


class ConfigError(QuotientEmError):
    """Harness configuration is malformed."""
