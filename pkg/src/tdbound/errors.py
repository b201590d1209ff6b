"""Exception hierarchy shared by all tdbound modules."""


class TdboundError(Exception):
    """Base class for errors raised by tdbound."""


class DomainError(TdboundError, ValueError):
    """An argument lies outside the domain of a function (negative time, bk <= 0)."""


class InvalidPathError(TdboundError, ValueError):
    pass


class FifoViolationError(TdboundError, ValueError):
    pass


class ParameterError(TdboundError, ValueError):
    pass


class ConfigurationError(TdboundError, ValueError):
    pass


class CapacityError(TdboundError):
    """A size guard was exceeded (exact solvers only scale to desk-sized instances)."""


class InfeasibleError(TdboundError):
    pass


class LpError(TdboundError):
    """The LP solver failed, or reported an infeasible or unbounded problem."""


class TrainingError(TdboundError):
    pass


class GenerationError(TdboundError):
    pass


class SchemaError(TdboundError, ValueError):
    """A file does not conform to its schema. ``problems`` lists every finding."""

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)
