"""
Regression metrics shared by the sensitivity report and model evaluation.
"""
import numpy as np

from apps.core.exceptions import DimensionError, ParameterError, UndefinedMetricError


def _pair(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise DimensionError(f'shapes differ: {y_true.shape} vs {y_pred.shape}')
    if y_true.ndim not in (1, 2):
        raise DimensionError(f'expected 1D or 2D arrays, got shape {y_true.shape}')
    return y_true, y_pred


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float | np.ndarray:
    """
    Coefficient of determination ``1 - SS_res / SS_tot``.

    2D inputs are scored column by column.

    Raises:
        ParameterError: With fewer than two samples.
        UndefinedMetricError: If a column of ``y_true`` is constant.
    """
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.shape[0] < 2:
        raise ParameterError(f'R2 needs at least 2 samples, got {y_true.shape[0]}')
    ss_res = ((y_true - y_pred) ** 2).sum(axis=0)
    ss_tot = ((y_true - y_true.mean(axis=0)) ** 2).sum(axis=0)
    # The mean of a constant column can round off, leaving a tiny nonzero SS_tot.
    if np.any(np.ptp(y_true, axis=0) == 0) or np.any(ss_tot == 0):
        raise UndefinedMetricError('R2 is undefined for a constant target')
    score = 1.0 - ss_res / ss_tot
    return float(score) if y_true.ndim == 1 else score


def relative_l2(y_true: np.ndarray, y_pred: np.ndarray) -> float | np.ndarray:
    """
    Relative L2 error ``||y_pred - y_true|| / ||y_true||``, per column for 2D inputs.

    Raises:
        UndefinedMetricError: If a column of ``y_true`` is all zeros.
    """
    y_true, y_pred = _pair(y_true, y_pred)
    norm = np.linalg.norm(y_true, axis=0)
    if np.any(norm == 0):
        raise UndefinedMetricError('relative L2 is undefined for an all-zero target')
    error = np.linalg.norm(y_pred - y_true, axis=0) / norm
    return float(error) if y_true.ndim == 1 else error


def mean_squared_error(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Mean of squared differences over all entries."""
    y_true, y_pred = _pair(y_true, y_pred)
    return float(((y_true - y_pred) ** 2).mean())
