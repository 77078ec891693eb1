"""Exception hierarchy shared by every stage of the pipeline.

Each exception class carries the process exit code the CLI maps it to.
"""


class VarigeoError(Exception):
    exit_code = 1


class ParseError(VarigeoError):
    """Lexing or parsing failure in an expression, form literal or problem file."""

    exit_code = 2

    def __init__(self, message, position=None, source=None):
        self.position = position
        self.source = source
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ChartError(VarigeoError):
    """Chart declaration is malformed or lacks a role a construction needs."""

    exit_code = 2


class ProblemFileError(VarigeoError):
    exit_code = 2


class HypothesisError(VarigeoError):
    """A theorem hypothesis (co-orientation, compatibility, normalization) failed."""

    exit_code = 3


class RankUndecided(VarigeoError):
    """A pivot could be neither certified zero nor certified nonzero."""

    exit_code = 4

    def __init__(self, message, pivot=None):
        self.pivot = pivot
        super().__init__(message)


class GaugeRequiresPinning(VarigeoError):
    exit_code = 6


class VerificationFailed(VarigeoError):
    exit_code = 7


class DomainError(VarigeoError, ArithmeticError):
    """Numeric evaluation left the domain of definition (x/0, log of x <= 0, ...)."""


class SingularLocusError(VarigeoError):
    """The integrator stepped onto a point where the vector field is undefined."""

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)


class InitialConditionError(VarigeoError):
    """Initial state off the constraint set beyond the projection tolerance."""
