"""Error hierarchy shared by the transform, classifier and benchmark modules."""


class BenchError(Exception):
    """Base class for every error raised on purpose by this package."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    @property
    def kind(self) -> str:
        return self.__class__.__name__


class NonPositivePart(BenchError):
    pass


class TooShort(BenchError):
    pass


class NotZeroSum(BenchError):
    pass


class DimensionMismatch(BenchError):
    pass


class InvalidParameter(BenchError, ValueError):
    pass


class InsufficientSamples(BenchError, ValueError):
    pass


class RankDeficient(BenchError):
    def __init__(self, message: str, components=()):
        super().__init__(message)
        self.components = tuple(components)


class NoConvergence(BenchError):
    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


class NeighborhoodTooLarge(BenchError):
    pass


class EigenFailure(BenchError):
    pass


class DegenerateLabels(BenchError):
    pass


class NonFinite(BenchError):
    pass


class UnknownLabel(BenchError):
    pass


class BadN(BenchError):
    pass


class BadCovariance(BenchError):
    pass


class ParseError(BenchError):
    def __init__(self, message: str, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ZeroHandlingError(BenchError):
    pass


class MissingColumn(BenchError):
    pass


class ClassTooSmall(BenchError):
    pass


class ConfigError(BenchError):
    pass


class IoError(BenchError):
    pass


def serialize_error(obj) -> dict:
    if isinstance(obj, BenchError):
        return {"error_type": obj.kind, "message": obj.message}
    return {"error_type": obj.__class__.__name__, "message": str(obj)}
