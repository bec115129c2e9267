"""Exception hierarchy.

Each class carries the CLI exit status it maps to, so the command-line front
end never has to pattern-match on messages.
"""


class NMLError(Exception):
    exit_code = 1


class InputError(NMLError, ValueError):
    """Malformed input: unreadable file, bad labels, wrong shapes."""

    exit_code = 3


class DomainError(NMLError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 4


class OutOfDomainError(DomainError):
    """The MLE of the data falls outside the restricted domain of the NML model."""

    exit_code = 4


class DegenerateDomainError(DomainError):
    """A domain parameter estimate is zero (e.g. a cluster mean at the origin)."""

    exit_code = 4


class SingularityError(NMLError, ArithmeticError):
    """The covariance MLE is rank-deficient."""

    exit_code = 5


class InfeasibleError(NMLError):
    """Too few points for the requested number of full-rank clusters."""

    exit_code = 5


class ConfigError(NMLError, ValueError):
    exit_code = 6
