# errors.py


"""
Exception hierarchy of the benchmark engine.

Every error raised on purpose by prepbench derives from PrepBenchError, and also from
the builtin exception closest to its meaning, so callers can catch either.
"""


import functools


class PrepBenchError(Exception):
    """Base class for all prepbench errors."""


class InvalidSpecError(PrepBenchError, ValueError):
    """A dataset spec or functional form is malformed."""


class NumericError(PrepBenchError, ArithmeticError):
    """Non-finite or out-of-range numbers where finite ones are required."""


class GenerationError(PrepBenchError, RuntimeError):
    """A generated dataset violates a post-condition (e.g. class balance)."""


class UndefinedMetricError(PrepBenchError, ValueError):
    """A metric is undefined for the given input (e.g. single-class labels)."""


class UndefinedCorrelationError(PrepBenchError, ValueError):
    """Correlation with a zero-variance column."""


class FitError(PrepBenchError, RuntimeError):
    """A model or transformer cannot be fitted on the given data."""


class NotFittedError(PrepBenchError, RuntimeError):
    """A transformer was used before fit."""


class SchemaError(PrepBenchError, ValueError):
    """Column counts or names do not match the fitted schema."""


class ArgumentError(PrepBenchError, ValueError):
    """An argument is outside its documented domain."""


class PreconditionError(PrepBenchError, ValueError):
    """Input does not satisfy an operation's precondition."""


class TuningError(PrepBenchError, RuntimeError):
    """Every tuning trial failed."""


class IngestionError(PrepBenchError, ValueError):
    """A raw CSV cannot be turned into a dataset."""


class ReportError(PrepBenchError, RuntimeError):
    """Nothing to report."""


class ConfigError(PrepBenchError, ValueError):
    """An experiment or rules file is invalid."""


class UnseenCategoryWarning(UserWarning):
    """transform met a category that was not present at fit time."""


class DegenerateColumnWarning(UserWarning):
    """A column has zero variance and is passed through."""


def check_fitted(func):
    """
    Decorator to check that a transformer has been fitted before it transforms anything.

    The wrapped object must expose a boolean `is_fitted` attribute or property.

    Raises:
        NotFittedError: If the transformer has not been fitted yet.
    """
    @functools.wraps(func)
    def wrapper(self, *args, **kwargs):
        if not self.is_fitted:
            raise NotFittedError(f"{type(self).__name__} must be fitted before calling {func.__name__}")
        return func(self, *args, **kwargs)
    return wrapper
