"""
Seeded train/validation/test splits and nested training subsets.
"""
import math
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ConfigError
from apps.datasets.container import Dataset

ALLOWED_FRACTIONS = (0.05, 0.10, 0.25, 0.50, 0.75, 1.00)


@dataclass(frozen=True)
class SplitSpec:
    """
    Split ratios and seed.

    ``train_fraction`` restricts the training split to a seeded subset; the
    subsets produced by one seed are nested across fractions.
    """

    seed: int = 0
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    train_fraction: float | None = None

    def validate(self) -> 'SplitSpec':
        """
        Raises:
            ConfigError: If the ratios do not sum to 1 or the fraction is not allowed.
        """
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ConfigError(f'ratios must be three non-negative values, got {self.ratios}')
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f'ratios must sum to 1, got {sum(self.ratios)}')
        if self.train_fraction is not None and not any(
            math.isclose(self.train_fraction, allowed) for allowed in ALLOWED_FRACTIONS
        ):
            raise ConfigError(
                f'train_fraction must be one of {list(ALLOWED_FRACTIONS)}, got {self.train_fraction}'
            )
        return self


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Partition ``range(n)`` into train, validation and test indices.

    Sizes are ``round(ratio * n)`` for train and validation; test takes the
    remainder.
    """
    spec.validate()
    permutation = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(round(spec.ratios[0] * n))
    n_val = min(int(round(spec.ratios[1] * n)), n - n_train)
    train = permutation[:n_train]
    val = permutation[n_train:n_train + n_val]
    test = permutation[n_train + n_val:]
    return train, val, test


def subsample_indices(train: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Return the first ``ceil(fraction * len(train))`` entries of a seeded permutation."""
    if not any(math.isclose(fraction, allowed) for allowed in ALLOWED_FRACTIONS):
        raise ConfigError(f'fraction must be one of {list(ALLOWED_FRACTIONS)}, got {fraction}')
    count = math.ceil(fraction * len(train) - 1e-9)
    order = np.random.default_rng(seed).permutation(len(train))
    return np.asarray(train)[order[:count]]


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Split a dataset, applying ``spec.train_fraction`` to the training part."""
    train, val, test = split_indices(len(dataset), spec)
    if spec.train_fraction is not None:
        train = subsample_indices(train, spec.train_fraction, spec.seed)
    return dataset.subset(train), dataset.subset(val), dataset.subset(test)


def subsample(train: Dataset, fraction: float, seed: int) -> Dataset:
    """Return a seeded ``fraction`` of a training split."""
    return train.subset(subsample_indices(np.arange(len(train)), fraction, seed))
