"""Exception hierarchy shared by all bridgelab modules."""


class BridgelabError(Exception):
    """Base class for all library errors."""


class DomainError(BridgelabError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateProcessError(DomainError):
    """The process has zero terminal variance so the bridge is undefined."""


class ConfigurationError(BridgelabError, ValueError):
    """Inconsistent or unsupported configuration."""


class NumericError(BridgelabError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class SingularityError(NumericError):
    """Evaluation at a point where a closed form is singular."""


class TrainingDivergence(NumericError):
    """Stochastic gradient descent diverged."""
