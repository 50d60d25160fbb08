"""
models/errors.py — Exception Hierarchy
======================================
Configuration problems map to CLI exit code 2, everything numerical to 1.
"""


class PorousFrontError(Exception):
    """Root of every error raised by this package."""


class ConfigurationError(PorousFrontError, ValueError):
    """Invalid policy, grid, scenario or type invariant."""


class DomainError(PorousFrontError, ValueError):
    """Argument outside an operation's domain (negative fuel, t <= tau, ...)."""


class CoefficientBoundsError(DomainError):
    """Coefficient field violates its declared parabolicity bounds."""


class KernelMismatchError(DomainError):
    """Two kernel handles cannot be compared."""


class NumericalError(PorousFrontError, RuntimeError):
    """Non-finite values or a numerical procedure that did not succeed."""


class LocalExistenceError(NumericalError):
    """Picard window shrunk to nothing without contracting."""

    def __init__(self, message: str, shrink_history: list | None = None):
        super().__init__(message)
        self.shrink_history = list(shrink_history or [])


class BallViolationError(NumericalError):
    """An iterate left the Hölder ball of the invariant set."""


class FdStabilityError(NumericalError):
    """Finite-difference step violates the stability restriction."""
