"""
Principal component analysis via SVD of the centered matrix.
"""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from apps.core.exceptions import DimensionError, NumericalError, ParameterError


@dataclass(frozen=True)
class PCAModel:
    """
    Attributes:
        components: (K, p) orthonormal rows, variance ordered.
        explained_variance: (K,) non-increasing.
        mean: (p,) feature means of the fit data.
    """

    components: np.ndarray
    explained_variance: np.ndarray
    mean: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


class PCA(TransformerMixin, BaseEstimator):
    """
    Top-K principal directions.

    Sign convention: the largest-magnitude entry of every component is
    positive.
    """

    def __init__(self, n_components: int = 32) -> None:
        self.n_components = n_components

    def fit(self, Z: np.ndarray, y: np.ndarray | None = None) -> 'PCA':
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2:
            raise DimensionError(f'expected a 2D matrix, got shape {Z.shape}')
        n, p = Z.shape
        k = self.n_components
        if not 1 <= k <= min(n - 1, p):
            raise ParameterError(f'K must be in [1, {min(n - 1, p)}] for a {n}x{p} matrix, got {k}')

        mean = Z.mean(axis=0)
        try:
            _, singular, vt = np.linalg.svd(Z - mean, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f'SVD did not converge: {exc}') from exc

        components = vt[:k].copy()
        pivots = np.argmax(np.abs(components), axis=1)
        signs = np.sign(components[np.arange(k), pivots])
        components *= np.where(signs == 0, 1.0, signs)[:, None]
        self.model_ = PCAModel(
            components=components,
            explained_variance=singular[:k] ** 2 / n,
            mean=mean,
        )
        return self

    def transform(self, Z: np.ndarray) -> np.ndarray:
        return pca_project(Z, self.model_)

    def inverse_transform(self, scores: np.ndarray) -> np.ndarray:
        return np.asarray(scores, dtype=np.float64) @ self.model_.components + self.model_.mean


def pca_fit(Z: np.ndarray, k: int) -> PCAModel:
    """Fit a K-component PCA model."""
    return PCA(n_components=k).fit(Z).model_


def pca_project(rows: np.ndarray, model: PCAModel) -> np.ndarray:
    """
    Project one row (p,) or a matrix (n, p) onto the components.

    Raises:
        DimensionError: If the width differs from the model's.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[-1] != model.mean.shape[0]:
        raise DimensionError(f'expected width {model.mean.shape[0]}, got {rows.shape[-1]}')
    return (rows - model.mean) @ model.components.T
