"""Exception types shared across the package."""


class D3srError(Exception):
    """Base class for all package errors."""


class RangeBelowHeight(D3srError, ValueError):
    """Slant range shorter than the platform height."""


class InconsistentGeometry(D3srError, ValueError):
    """Look angle not reachable at the requested elevation."""


class GridTooCoarse(D3srError, ValueError):
    pass


class DimensionMismatch(D3srError, ValueError):
    pass


class OutOfRange(D3srError, ValueError):
    pass


class NumericalBreakdown(D3srError, ArithmeticError):
    """Every singular value of a subproblem fell below the truncation level."""


class EmptySupport(D3srError, ArithmeticError):
    """Pruning removed every cell of the active set."""


class DidNotConverge(D3srError, ArithmeticError):
    """Iteration budget exhausted.

    ``result`` carries the best state reached, so callers can still use it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class Infeasible(D3srError, ValueError):
    pass


class SingularCovariance(D3srError, ArithmeticError):
    pass


class RankDeficient(D3srError, ArithmeticError):
    pass


class ConfigError(D3srError, ValueError):
    """Bad experiment configuration; message names the offending field."""
