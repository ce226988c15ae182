"""
Sensitivity services for the ICF inverse-estimation toolkit.

This module builds the linear identifiability report: image PCA scores and
scalar diagnostics are standardized, concatenated and ridge-regressed on
the standardized parameters, and held-out R2 flags the parameters the
observables barely constrain.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from django.conf import settings

from apps.core import charts
from apps.core.exceptions import DataIOError, ParameterError
from apps.datasets.container import Dataset
from apps.sensitivity.decomposition import PCA
from apps.sensitivity.linear_model import RidgeRegression
from apps.sensitivity.metrics import r2_score
from apps.sensitivity.preprocessing import FeatureStandardizer

logger = logging.getLogger('icf_inverse')

FLOAT_FORMAT = '%.17g'


@dataclass
class SensitivityReport:
    """
    Ridge coefficients over [PC | scalar] features with held-out scores.

    ``flags[j]`` is True when parameter ``j`` is weakly identifiable, which
    is exactly ``r2[j] < r2_threshold``.
    """

    coefficients: np.ndarray
    feature_labels: list[str]
    parameter_labels: list[str]
    r2: np.ndarray
    flags: np.ndarray
    n_components: int
    alpha: float
    r2_threshold: float
    split_seed: int
    explained_variance: np.ndarray
    ablation: dict[str, Any] = field(default_factory=dict)

    @property
    def weak_parameters(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.flags)]

    def to_frame(self) -> pd.DataFrame:
        """Coefficient table with an ``r2`` footer row."""
        frame = pd.DataFrame(self.coefficients, index=self.feature_labels, columns=self.parameter_labels)
        footer = pd.DataFrame([self.r2], index=['r2'], columns=self.parameter_labels)
        frame = pd.concat([frame, footer])
        frame.index.name = 'feature'
        return frame

    def to_dict(self) -> dict[str, Any]:
        return {
            'n_components': self.n_components,
            'lambda': self.alpha,
            'r2_threshold': self.r2_threshold,
            'split_seed': self.split_seed,
            'parameters': self.parameter_labels,
            'r2': [float(v) for v in self.r2],
            'weakly_identifiable': [bool(v) for v in self.flags],
            'explained_variance': [float(v) for v in self.explained_variance],
            'ablation': self.ablation,
        }


class SensitivityService:
    """
    Service class for the sensitivity analysis.

    Provides methods for building the report and writing its artifacts.
    """

    @staticmethod
    def split_halves(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """Seeded 50/50 fit/held-out split."""
        if n < 4:
            raise ParameterError(f'sensitivity analysis needs at least 4 samples, got {n}')
        order = np.random.default_rng(seed).permutation(n)
        half = n // 2
        return order[:half], order[half:]

    @staticmethod
    def _ridge_scores(
        fit_features: np.ndarray,
        held_features: np.ndarray,
        fit_targets: np.ndarray,
        held_targets: np.ndarray,
        alpha: float,
    ) -> tuple[np.ndarray, np.ndarray]:
        ridge = RidgeRegression(alpha=alpha).fit(fit_features, fit_targets)
        r2 = r2_score(held_targets, ridge.predict(held_features))
        return ridge.coef_, np.atleast_1d(r2)

    @staticmethod
    def build_report(
        dataset: Dataset,
        n_components: int | None = None,
        alpha: float | None = None,
        r2_threshold: float | None = None,
        split_seed: int = 0,
    ) -> SensitivityReport:
        """
        Run the full sensitivity pipeline.

        Args:
            dataset: Samples to analyse.
            n_components: PCA components K.
            alpha: Ridge strength lambda.
            r2_threshold: Held-out R2 below which a parameter is flagged.
            split_seed: Seed of the fit/held-out shuffle.

        Returns:
            The report; deterministic given the arguments.
        """
        config = settings.ICF_INVERSE
        k = n_components if n_components is not None else config.get('SENSITIVITY_COMPONENTS', 32)
        alpha = alpha if alpha is not None else config.get('SENSITIVITY_LAMBDA', 1.0)
        threshold = r2_threshold if r2_threshold is not None else config.get('R2_THRESHOLD', 0.2)

        fit, held = SensitivityService.split_halves(len(dataset), split_seed)
        images = dataset.images.reshape(len(dataset), -1)

        image_scaler = FeatureStandardizer().fit(images[fit])
        pca = PCA(n_components=k).fit(image_scaler.transform(images[fit]))
        scores_fit = pca.transform(image_scaler.transform(images[fit]))
        scores_held = pca.transform(image_scaler.transform(images[held]))

        score_scaler = FeatureStandardizer().fit(scores_fit)
        scalar_scaler = FeatureStandardizer().fit(dataset.scalars[fit])
        target_scaler = FeatureStandardizer().fit(dataset.params[fit])

        blocks = {
            'image': (score_scaler.transform(scores_fit), score_scaler.transform(scores_held)),
            'scalar': (scalar_scaler.transform(dataset.scalars[fit]), scalar_scaler.transform(dataset.scalars[held])),
        }
        h_fit = np.concatenate([blocks['image'][0], blocks['scalar'][0]], axis=1)
        h_held = np.concatenate([blocks['image'][1], blocks['scalar'][1]], axis=1)
        y_fit = target_scaler.transform(dataset.params[fit])
        y_held = target_scaler.transform(dataset.params[held])

        coefficients, r2 = SensitivityService._ridge_scores(h_fit, h_held, y_fit, y_held, alpha)

        ablation: dict[str, Any] = {}
        for name, (block_fit, block_held) in blocks.items():
            _, block_r2 = SensitivityService._ridge_scores(block_fit, block_held, y_fit, y_held, alpha)
            ablation[f'{name}_only_r2'] = [float(v) for v in block_r2]
        ablation['image_max_abs_coef'] = [float(v) for v in np.abs(coefficients[:k]).max(axis=0)]
        ablation['scalar_max_abs_coef'] = [float(v) for v in np.abs(coefficients[k:]).max(axis=0)]

        n_params = dataset.params.shape[1]
        report = SensitivityReport(
            coefficients=coefficients,
            feature_labels=[f'PC{i + 1}' for i in range(k)] + [f'scalar{i}' for i in range(dataset.scalars.shape[1])],
            parameter_labels=[f'param{j}' for j in range(n_params)],
            r2=r2,
            flags=r2 < threshold,
            n_components=k,
            alpha=float(alpha),
            r2_threshold=float(threshold),
            split_seed=split_seed,
            explained_variance=pca.model_.explained_variance,
            ablation=ablation,
        )
        for j in range(n_params):
            status = 'weakly identifiable' if report.flags[j] else 'identifiable'
            logger.info(f'param{j}: held-out R2 {r2[j]:.4f} ({status})')
        return report

    @staticmethod
    def write_report(report: SensitivityReport, out_dir: Path) -> None:
        """Write ``sensitivity.csv``, ``sensitivity.json`` and ``sensitivity.svg``."""
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            report.to_frame().to_csv(out_dir / 'sensitivity.csv', float_format=FLOAT_FORMAT)
            (out_dir / 'sensitivity.json').write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n')
            (out_dir / 'sensitivity.svg').write_text(
                charts.heatmap(
                    report.coefficients.T,
                    column_labels=report.feature_labels,
                    row_labels=report.parameter_labels,
                    title=f'Ridge sensitivity (K={report.n_components}, lambda={report.alpha:g})',
                    separator_after=report.n_components,
                )
            )
        except OSError as exc:
            raise DataIOError(f'cannot write sensitivity report to {out_dir}: {exc}') from exc
        logger.info(f'Sensitivity report written to {out_dir}')
