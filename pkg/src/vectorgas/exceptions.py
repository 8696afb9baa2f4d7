"""Exception hierarchy.

Domain and validation problems derive from :class:`ValueError` so that they
compose with scikit-learn style parameter checks; numerical failures derive
from :class:`RuntimeError`.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class SingularPointError(DomainError):
    """Evaluation requested exactly at a singular point."""


class TruncationError(DomainError):
    """A truncated table (lattice, zero table) is too short for the request."""


class AdmissibilityError(DomainError):
    """A user supplied external field fails the growth condition."""


class UnsupportedRouteError(DomainError):
    """The requested computation is not available for these parameters."""


class MassMismatchError(DomainError):
    """Two measures that must share a total mass do not."""


class InfeasibleError(DomainError):
    """A constrained problem has an empty feasible set on the chosen grid."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
