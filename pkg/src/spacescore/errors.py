"""Exception hierarchy.

Input problems derive from :class:`InputError`; numerical failures from
:class:`NumericalError`. The CLI maps the two families to exit codes 2 and 3.
"""


class SpaceScoreError(Exception):
    """Base class for all package errors."""


class InputError(SpaceScoreError, ValueError):
    """Invalid user input: malformed files, bad arguments, domain violations."""


class OutOfDomainError(InputError):
    def __init__(self, message, dim=None):
        super().__init__(message)
        self.dim = dim


class InsufficientDataError(InputError):
    pass


class NoSupportError(InputError):
    """A table has no rows inside the requested space."""


class NumericalError(SpaceScoreError, ArithmeticError):
    """A linear-algebra step failed even after jitter escalation."""


class IllConditionedKernelError(NumericalError):
    pass


class DegenerateCovarianceError(NumericalError):
    def __init__(self, message, batch=None):
        super().__init__(message)
        self.batch = batch


class ObjectiveEvaluationError(SpaceScoreError):
    """The objective raised while evaluating ``x``."""

    def __init__(self, x, cause):
        super().__init__(f"objective evaluation failed at x={list(x)}: {cause!r}")
        self.x = x
        self.cause = cause


class DegenerateTargetsWarning(UserWarning):
    """All training targets are equal; standardization falls back to unit scale."""


class ContainmentWarning(UserWarning):
    """A scored space reaches outside the region the surrogate was trained on."""
