"""
Custom exceptions for the ICF inverse-estimation toolkit.

This module provides the exception hierarchy shared by every app. Each
exception carries a machine-readable code and the process exit code the
management commands return when it escapes a command.
"""
import logging
from typing import Any

logger = logging.getLogger('icf_inverse')


class InversionError(Exception):
    """Base exception for the toolkit."""

    exit_code = 1
    default_detail = 'An internal error occurred.'
    default_code = 'error'

    def __init__(self, detail: str | None = None, **context: Any) -> None:
        """
        Initialize the exception.

        Args:
            detail: Human readable message. Falls back to ``default_detail``.
            **context: Extra diagnostic values kept on the instance.
        """
        self.detail = detail if detail is not None else self.default_detail
        self.context = context
        super().__init__(self.detail)

    @property
    def code(self) -> str:
        """Return the machine-readable error code."""
        return self.default_code

    def as_dict(self) -> dict[str, Any]:
        """Return a JSON-serializable description of the error."""
        data: dict[str, Any] = {
            'code': self.code,
            'message': self.detail,
            'exit_code': self.exit_code,
        }
        if self.context:
            data['context'] = {key: _jsonable(value) for key, value in self.context.items()}
        return data


class DimensionError(InversionError):
    """Raised when operands have incompatible shapes."""

    exit_code = 2
    default_detail = 'Incompatible tensor dimensions.'
    default_code = 'dimension_error'


class ParameterError(InversionError):
    """Raised when a scalar parameter is outside its admissible range."""

    exit_code = 2
    default_detail = 'Invalid parameter value.'
    default_code = 'parameter_error'


class ConfigError(InversionError):
    """Raised when a configuration violates its invariants."""

    exit_code = 2
    default_detail = 'Invalid configuration.'
    default_code = 'config_error'


class DataFormatError(InversionError):
    """Raised when an on-disk container or checkpoint is corrupt."""

    exit_code = 3
    default_detail = 'Malformed data container.'
    default_code = 'format_error'


class DataIOError(InversionError):
    """Raised when files are missing or cannot be read or written."""

    exit_code = 3
    default_detail = 'I/O failure.'
    default_code = 'io_error'


class NumericalError(InversionError):
    """Raised when a computation produces or meets non-finite or singular values."""

    exit_code = 4
    default_detail = 'Numerical failure.'
    default_code = 'numerical_error'


class UndefinedMetricError(NumericalError):
    """Raised when a metric is undefined for the given inputs."""

    default_detail = 'Metric is undefined for constant targets.'
    default_code = 'undefined_metric'


class TrainingAborted(NumericalError):
    """Raised when training meets a non-finite loss."""

    default_detail = 'Training aborted on a non-finite loss.'
    default_code = 'training_aborted'


def _jsonable(value: Any) -> Any:
    """Coerce diagnostic context values into JSON-friendly types."""
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    return str(value)


def log_exception(exc: InversionError, where: str) -> None:
    """
    Log an exception at a level matching its severity.

    Usage errors are warnings, everything else is an error.

    Args:
        exc: The exception that was raised.
        where: Name of the command or service that failed.
    """
    log_message = f"{where} failed: {exc.code} - {exc.detail}"
    if exc.context:
        log_message += f" | {exc.as_dict()['context']}"

    if exc.exit_code >= 3:
        logger.error(log_message)
    else:
        logger.warning(log_message)
