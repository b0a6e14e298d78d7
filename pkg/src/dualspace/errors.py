"""Exception types shared across the package."""


class DualCSError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(DualCSError, ValueError):
    """A generator or plan specification violates its invariants."""


class DimensionError(DualCSError, ValueError):
    """Shapes of operands do not agree."""


class InconsistencyError(DualCSError, ValueError):
    """Input data is not self-consistent (e.g. a non-integrable FD image)."""


class UnderdeterminedError(DualCSError, ValueError):
    """The problem lacks the data needed to pin down a unique answer."""


class EnumerationBoundError(DualCSError, ValueError):
    """A brute-force routine was asked to exceed its enumeration bound."""


class FitError(DualCSError, ValueError):
    """A least-squares fit has a rank-deficient design."""


class NotFound(DualCSError):
    """Exhaustive search finished without a feasible candidate."""
