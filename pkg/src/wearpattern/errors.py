"""Exception hierarchy. Every library error derives from :class:`WearPatternError`."""


class WearPatternError(Exception):
    """Base class; the CLI maps these to exit status 1."""


class ParameterError(WearPatternError, ValueError):
    pass


class DimensionError(ParameterError):
    pass


class ParseError(WearPatternError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RejectedRecordError(ParseError):
    """A syntactically valid record with an unknown sensor kind."""


class EmptyDayError(WearPatternError):
    pass


class InvalidRangeError(ParameterError):
    pass


class AlignmentError(ParameterError):
    pass


class UndefinedDistanceError(WearPatternError):
    pass


class PreprocessingError(WearPatternError):
    pass


class UndefinedScoreError(WearPatternError):
    pass


class InsufficientCurveError(WearPatternError):
    pass


class InsufficientDataError(WearPatternError):
    pass


class UndefinedCorrelationError(WearPatternError):
    pass


class EmptyCohortError(WearPatternError):
    pass
