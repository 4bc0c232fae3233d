"""Exception hierarchy shared across the package."""


class SpotmatchError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SpotmatchError, ValueError):
    """An argument or a market state violates its documented domain."""


class RegimeError(SpotmatchError):
    """The operation is only defined in the other adoption-growth regime."""


class BracketError(SpotmatchError):
    """A bisection bracket does not contain the sought decision flip."""


class BudgetError(SpotmatchError):
    """An exhaustive enumeration would exceed its rollout budget."""


class ConvergenceError(SpotmatchError):
    """An iterative search hit its ceiling without finding a solution."""


class IntegralityError(SpotmatchError):
    """A designated adoption count would need fractional rounding."""
