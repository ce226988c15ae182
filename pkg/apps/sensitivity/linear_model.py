"""
Ridge (Tikhonov) regression without intercept.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator, RegressorMixin

from apps.core.exceptions import DimensionError, NumericalError, ParameterError


@dataclass(frozen=True)
class RidgeModel:
    """Coefficients (p, n_targets) and the regularization strength."""

    coefficients: np.ndarray
    alpha: float

    def predict(self, H: np.ndarray) -> np.ndarray:
        return np.asarray(H, dtype=np.float64) @ self.coefficients


class RidgeRegression(RegressorMixin, BaseEstimator):
    """
    Solves ``(H^T H + alpha I) W = H^T Y`` by Cholesky factorization.

    Features and targets are expected to be standardized, so no intercept
    is fitted.
    """

    def __init__(self, alpha: float = 1.0) -> None:
        self.alpha = alpha

    def fit(self, H: np.ndarray, Y: np.ndarray) -> 'RidgeRegression':
        H = np.asarray(H, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if self.alpha < 0 or not np.isfinite(self.alpha):
            raise ParameterError(f'lambda must be a finite value >= 0, got {self.alpha}')
        if H.ndim != 2 or H.shape[0] == 0:
            raise ParameterError(f'ridge needs a non-empty 2D design matrix, got shape {H.shape}')
        targets = Y.reshape(-1, 1) if Y.ndim == 1 else Y
        if targets.shape[0] != H.shape[0]:
            raise DimensionError(f'{H.shape[0]} rows in H but {targets.shape[0]} in Y')

        p = H.shape[1]
        if self.alpha == 0 and np.linalg.matrix_rank(H) < p:
            raise NumericalError('singular ridge system at lambda=0: use lambda > 0')
        gram = H.T @ H + self.alpha * np.eye(p)
        try:
            coefficients = cho_solve(cho_factor(gram), H.T @ targets)
        except LinAlgError as exc:
            raise NumericalError(f'ridge system is not positive definite ({exc}): use lambda > 0') from exc
        if not np.isfinite(coefficients).all():
            raise NumericalError('ridge coefficients are not finite')

        self.coef_ = coefficients
        self.model_ = RidgeModel(coefficients=coefficients, alpha=float(self.alpha))
        return self

    def predict(self, H: np.ndarray) -> np.ndarray:
        return self.model_.predict(H)


def ridge_fit(H: np.ndarray, Y: np.ndarray, alpha: float) -> RidgeModel:
    """Fit a ridge model and return its coefficients."""
    return RidgeRegression(alpha=alpha).fit(H, Y).model_
