"""Exception types shared across the package.

Plain invalid arguments raise ValueError; the classes below mark failures
that carry domain meaning (rank loss, solver breakdown, fits on empty data).
"""


class OpcompError(Exception):
    """Base class for package-specific failures."""


class DegenerateConstraints(OpcompError):
    """Constraint matrix lost column rank; the quadratic program is singular."""


class DegenerateCompression(OpcompError):
    """The compressed middle matrix is numerically singular."""


class DegenerateBasis(OpcompError):
    """Coarse stiffness matrix of a basis family is singular."""


class InfeasibleLocalization(OpcompError):
    """Support region too small to satisfy the moment constraints."""


class NumericalFailure(OpcompError):
    """Factorization or eigenvalue iteration broke down."""


class FitUndefined(OpcompError):
    """No usable data points for a requested least-squares fit."""
