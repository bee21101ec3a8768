"""Exception hierarchy shared by every module."""


class BoostBenchError(Exception):
    """Base class for all package errors."""


class ParameterError(BoostBenchError, ValueError):
    """An argument violates a documented precondition."""


class IngestionError(BoostBenchError):
    """A CSV cell could not be parsed; carries row and column context."""


class SchemaError(BoostBenchError):
    """Declared schema does not match the file or dataset."""


class VectorizationError(BoostBenchError):
    """Text vectorization received unusable input."""


class DegenerateError(BoostBenchError):
    """A quantity required by a formula is singular (one class, zero hessian)."""


class MetricError(BoostBenchError):
    """A metric is undefined on the given input."""


class PredictionError(BoostBenchError):
    """Prediction input does not match the training schema."""


class ReportError(BoostBenchError):
    """Report emission failed or had nothing to do."""
