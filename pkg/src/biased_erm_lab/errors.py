"""Shared exception types."""


class RangeError(ValueError):
    """A parameter lies outside its admissible range."""


class InsufficientData(RuntimeError):
    """A sample lacks the examples needed to define a rate or estimator."""


class DegenerateDenominator(ArithmeticError):
    """An analytic rate is undefined because its denominator mass is zero."""


class NoFeasiblePoint(RuntimeError):
    """A constrained search found no hypothesis satisfying the constraint."""
