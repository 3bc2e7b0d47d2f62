"""Exception hierarchy.

Two families matter to callers: :class:`DataError` (bad inputs, malformed
files, panels that cannot support an estimator) and :class:`NumericalError`
(singular systems, degenerate curves). The CLI maps them to distinct exit
codes.
"""


class AgingCurveError(ValueError):
    """Base class for all package errors."""


class DataError(AgingCurveError):
    pass


class NumericalError(AgingCurveError):
    pass


class InvalidParameterError(DataError):
    pass


class OutOfRangeError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class SpecError(DataError):
    pass


class GridError(DataError):
    pass


class ScheduleError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateRecordError(DataError):
    pass


class SingularDesignError(NumericalError):
    pass


class DegenerateCurveError(NumericalError):
    pass
