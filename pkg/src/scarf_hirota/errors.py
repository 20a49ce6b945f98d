"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures onto its stable exit-code contract (2 input, 3 numerical,
4 not applicable).
"""


class ScarfHirotaError(Exception):
    """Base class for all library errors."""

    exit_code = 2


class ConstraintViolation(ScarfHirotaError, ValueError):
    """Endowment parameters do not satisfy d1 + d2 + d3 + K + L = 1."""


class NegativeEndowment(ScarfHirotaError, ValueError):
    """An endowment (parameter or matrix entry) is negative in strict mode."""


class ConditionAViolation(ScarfHirotaError, ValueError):
    """The endowment matrix does not have unit row and column sums."""


class DegenerateDenominator(ScarfHirotaError, ValueError):
    """A budget denominator p^T b_h (or a price under a negative power) vanishes."""


class DomainError(ScarfHirotaError, ValueError):
    """The price vector lies outside the domain where the vector field is defined."""


class PreconditionViolation(ScarfHirotaError, ValueError):
    """An operation was called on a model outside its stated assumptions."""

    exit_code = 4


class DegenerateEdge(ScarfHirotaError, ValueError):
    """The edge minimum of an excess demand is not attained in the open edge.

    ``corner`` names the node (1-based) approached by the infimum.
    """

    exit_code = 4

    def __init__(self, message, corner=None):
        super().__init__(message)
        self.corner = corner


class NotApplicable(ScarfHirotaError):
    exit_code = 4


class InsufficientCrossings(ScarfHirotaError):
    """Fewer than three Poincare-section crossings were found."""

    exit_code = 3


class SamplingExhausted(ScarfHirotaError, RuntimeError):
    exit_code = 3


class InternalError(ScarfHirotaError, RuntimeError):
    """Two independent evaluations of the same quantity disagree."""

    exit_code = 3


class TheoremViolation(ScarfHirotaError, RuntimeError):
    """A simulation contradicts a proven stability guarantee.

    ``record`` holds everything needed to reproduce the offending run.
    """

    exit_code = 3

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
