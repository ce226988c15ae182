"""
Feature-wise standardization with population statistics.
"""
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from apps.core.exceptions import DimensionError, ParameterError

logger = logging.getLogger('icf_inverse')

CONSTANT_STD = 1e-12


@dataclass(frozen=True)
class StandardizationStats:
    """Per-feature mean, population std and constant-feature mask."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Standardize ``X`` with the stored statistics; constant features map to 0."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.shape[0]:
            raise DimensionError(f'expected {self.mean.shape[0]} features, got {X.shape[-1]}')
        scale = np.where(self.constant, 1.0, self.std)
        Z = (X - self.mean) / scale
        return np.where(self.constant, 0.0, Z)

    def invert(self, Z: np.ndarray) -> np.ndarray:
        """Map standardized values back to raw units."""
        return np.asarray(Z, dtype=np.float64) * self.std + self.mean


class FeatureStandardizer(TransformerMixin, BaseEstimator):
    """
    Zero-mean, unit-population-variance scaling.

    Features whose std falls below ``CONSTANT_STD`` are flagged constant
    and mapped to zero.
    """

    def fit(self, X: np.ndarray, y: np.ndarray | None = None) -> 'FeatureStandardizer':
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f'expected a 2D matrix, got shape {X.shape}')
        if X.shape[0] < 2:
            raise ParameterError(f'standardization needs at least 2 rows, got {X.shape[0]}')
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std < CONSTANT_STD
        if constant.any():
            logger.warning(f'{int(constant.sum())} constant feature(s) mapped to zero')
        self.stats_ = StandardizationStats(mean=mean, std=std, constant=constant)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return self.stats_.apply(X)

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return self.stats_.invert(Z)


def standardize_fit_apply(X: np.ndarray) -> tuple[np.ndarray, StandardizationStats]:
    """Fit statistics on ``X`` and return the standardized matrix with them."""
    standardizer = FeatureStandardizer().fit(X)
    return standardizer.transform(X), standardizer.stats_
