"""Exception types shared across the package."""
from __future__ import annotations


class ReductionError(Exception):
    """Base class for failures raised by model reduction routines."""


class ResonanceError(ReductionError):
    """A small divisor makes the requested reduction ill-defined.

    Attributes
    ----------
    mode : int or None
        Zero-based index of the offending (slave) mode, if known.
    monomial : tuple or None
        Multi-index of the monomial whose divisor vanishes, if known.
    """

    def __init__(self, message, mode=None, monomial=None):
        super().__init__(message)
        self.mode = mode
        self.monomial = monomial


class ConvergenceError(ReductionError):
    """An iterative solver (Newton, continuation, integrator) failed."""


class SchemaError(ValueError):
    """A serialized artifact does not follow the expected layout."""


def mode_label(index):
    """Human readable label for a zero-based mode index."""
    return f"mode {index + 1} (index {index})"
