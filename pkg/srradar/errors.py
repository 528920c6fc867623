"""Exceptions raised by the super-resolution radar toolkit.

Numerical non-success (a solver running out of iterations, a singular
interpolation system) is reported through status values on the returned
objects. Exceptions are reserved for inputs that cannot be processed at all.
"""

from __future__ import annotations


class SuperResolutionError(Exception):
    """Base error, tagged with the operation that rejected its input."""

    def __init__(self, operation: str, reason: str):
        self.operation = operation
        self.reason = reason
        super().__init__(f"{operation}: {reason}")


class DimensionError(SuperResolutionError, ValueError):
    """Raised on even L, length mismatches and out-of-range indices."""


class GridError(SuperResolutionError, ValueError):
    """Raised when a location does not sit on the requested fine grid."""


class SceneGenerationError(SuperResolutionError):
    """Raised when rejection sampling cannot produce a separated scene.

    Attributes
    ----------
    attempts : int
        Number of draws made before giving up.
    capacity : int
        Pigeonhole estimate of how many separated nodes fit in the
        sampling box.
    """

    def __init__(self, operation: str, reason: str, *, attempts: int, capacity: int):
        self.attempts = attempts
        self.capacity = capacity
        super().__init__(operation, reason)
