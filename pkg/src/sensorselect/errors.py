"""Exception types shared across the package."""


class SensorSelectError(Exception):
    """Base class for all package errors."""


class InvalidSelectionError(SensorSelectError):
    """A sensor index is out of range or duplicated."""


class InvalidParameterError(SensorSelectError):
    """A configuration value is outside its valid range."""


class SingularSystemError(SensorSelectError):
    """The normal-equations system is singular or too ill-conditioned.

    Carries the condition-number estimate that triggered the failure.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class EmptySelectionError(SensorSelectError):
    """No sensor survived thresholding / polishing."""


class SolverBreakdownError(SensorSelectError):
    """An inner linear system of the ADMM update could not be solved."""

    def __init__(self, message, gamma=None, iteration=None):
        super().__init__(message)
        self.gamma = gamma
        self.iteration = iteration


class StalledDescentError(SensorSelectError):
    """Backtracking line search failed to find an acceptable interior step."""

    def __init__(self, message, step=None, decrement=None):
        super().__init__(message)
        self.step = step
        self.decrement = decrement


class IngestionError(SensorSelectError):
    """A snapshot file is missing, malformed, or entirely invalid."""
