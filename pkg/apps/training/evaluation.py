"""
Loss evaluation and final test metrics.
"""
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ParameterError
from apps.datasets.container import Dataset
from apps.sensitivity.metrics import mean_squared_error, r2_score, relative_l2
from apps.training.bundle import ModelBundle

EVAL_BATCH = 64


@dataclass
class Predictions:
    """Eval-mode outputs for a whole split."""

    reconstructions: np.ndarray
    standardized: np.ndarray
    parameters: np.ndarray
    recon_mse: float
    reg_mse: float


def predict(bundle: ModelBundle, dataset: Dataset, batch_size: int = EVAL_BATCH) -> Predictions:
    """
    Run the model in eval mode over ``dataset``.

    Losses are means over samples of the per-sample MSE, which equals the
    full-split MSE because all samples have the same size.

    Raises:
        ParameterError: If the split is empty.
    """
    n = len(dataset)
    if n == 0:
        raise ParameterError('cannot evaluate an empty split')
    bundle.eval()
    reconstructions, standardized = [], []
    recon_total = reg_total = 0.0
    for start in range(0, n, batch_size):
        indices = np.arange(start, min(start + batch_size, n))
        field, scalars, targets = bundle.inputs(dataset, indices)
        reconstruction, estimates = bundle.forward(field, scalars)
        recon = reconstruction.images()
        reconstructions.append(recon)
        standardized.append(estimates.numpy())
        recon_total += float(((recon - dataset.images[indices]) ** 2).mean()) * len(indices)
        reg_total += float(((estimates.data - targets.data) ** 2).mean()) * len(indices)
    standardized_all = np.concatenate(standardized)
    return Predictions(
        reconstructions=np.concatenate(reconstructions),
        standardized=standardized_all,
        parameters=bundle.destandardize(standardized_all),
        recon_mse=recon_total / n,
        reg_mse=reg_total / n,
    )


def score_predictions(
    truth: np.ndarray,
    predicted: np.ndarray,
    target_indices: tuple[int, ...],
    recon_mse: float,
    reg_mse: float,
) -> dict[str, float]:
    """
    Assemble the test metric dict.

    ``truth`` and ``predicted`` are (n, len(target_indices)) in parameter
    units; R2 and relative L2 are reported per parameter.
    """
    metrics = {'recon_mse': float(recon_mse), 'reg_mse': float(reg_mse)}
    r2 = np.atleast_1d(r2_score(truth, predicted))
    rel = np.atleast_1d(relative_l2(truth, predicted))
    for column, index in enumerate(target_indices):
        metrics[f'r2_param{index}'] = float(r2[column])
        metrics[f'rel_l2_param{index}'] = float(rel[column])
    metrics['param_mse'] = mean_squared_error(truth, predicted)
    return metrics


def evaluate(bundle: ModelBundle, test: Dataset) -> tuple[dict[str, float], Predictions]:
    """
    Test metrics in eval mode: reconstruction MSE, standardized regression
    MSE and per-parameter R2 / relative L2 in parameter units.
    """
    predictions = predict(bundle, test)
    truth = test.params[:, list(bundle.target_indices)]
    metrics = score_predictions(
        truth,
        predictions.parameters,
        bundle.target_indices,
        predictions.recon_mse,
        predictions.reg_mse,
    )
    return metrics, predictions
