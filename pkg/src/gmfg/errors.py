"""Exception types shared by the solver modules."""

from __future__ import annotations


class InvalidInputError(ValueError):
    """Input violates a documented precondition."""


class NumericalFailure(ArithmeticError):
    """A discrete scheme could not produce a trustworthy result."""


class StabilityError(NumericalFailure):
    """Step size or grid too coarse for the requested drift.

    ``required_dt`` is set when a smaller time step cures the problem,
    ``required_n`` when the spatial grid must be refined instead.
    """

    def __init__(self, message: str, required_dt: float | None = None, required_n: int | None = None):
        super().__init__(message)
        self.required_dt = required_dt
        self.required_n = required_n


class PositivityError(NumericalFailure):
    """Hopf-Cole variable or density lost positivity."""


class BoundViolation(AssertionError):
    """An a-priori estimate failed on discrete data (points at a scheme bug)."""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report
