"""
Dataset services for the ICF inverse-estimation toolkit.

This module generates synthetic datasets and loads them back from disk.
"""
import logging
from pathlib import Path

import numpy as np
from django.conf import settings

from apps.core.exceptions import ParameterError
from apps.datasets.container import Dataset, DatasetManifest, read_container, write_container
from apps.datasets.simulator import (
    DEAD_AMPLITUDE,
    N_PARAMS,
    NOISE_SIGMA,
    SIMULATOR_VERSION,
    check_size,
    sample_noise_seed,
    synth_forward,
)

logger = logging.getLogger('icf_inverse')

# Parameter sub-range (low, high) per sampling regime.
REGIMES = {
    'finetune': (0.0, 1.0),
    'pretrain': (0.0, 0.5),
}


class DatasetService:
    """
    Service class for dataset operations.

    Provides methods for generating synthetic datasets and loading them.
    """

    @staticmethod
    def sample_parameters(n: int, seed: int, regime: str = 'finetune') -> np.ndarray:
        """
        Draw ``n`` parameter vectors uniformly from the regime's sub-cube.

        Raises:
            ParameterError: On ``n < 1`` or an unknown regime.
        """
        if n < 1:
            raise ParameterError(f'sample count must be at least 1, got {n}')
        if regime not in REGIMES:
            raise ParameterError(f'unknown regime {regime!r}, expected one of {sorted(REGIMES)}')
        low, high = REGIMES[regime]
        rng = np.random.default_rng(seed)
        return low + (high - low) * rng.random((n, N_PARAMS))

    @staticmethod
    def generate_dataset(
        n: int,
        size: int,
        seed: int,
        out_dir: Path,
        regime: str = 'finetune',
    ) -> DatasetManifest:
        """
        Simulate ``n`` samples and write them as a container.

        Each sample draws its noise from a seed derived from ``(seed, index)``,
        so the output is byte-identical for identical arguments.

        Args:
            n: Number of samples.
            size: Image side length.
            seed: Dataset seed.
            out_dir: Target directory.
            regime: Parameter sub-range, ``finetune`` or ``pretrain``.

        Returns:
            The manifest that was written.
        """
        check_size(size)
        params = DatasetService.sample_parameters(n, seed, regime)
        noise_sigma = settings.ICF_INVERSE.get('NOISE_SIGMA', NOISE_SIGMA)
        dead_amplitude = settings.ICF_INVERSE.get('DEAD_PARAM_AMPLITUDE', DEAD_AMPLITUDE)

        images = np.empty((n, size, size, 4))
        scalars = np.empty((n, 15))
        for index in range(n):
            images[index], scalars[index] = synth_forward(
                params[index],
                sample_noise_seed(seed, index),
                size,
                noise_sigma=noise_sigma,
                dead_amplitude=dead_amplitude,
            )

        manifest = write_container(
            Path(out_dir),
            params,
            images,
            scalars,
            generator_seed=seed,
            simulator_version=f'{SIMULATOR_VERSION}+{regime}',
        )
        logger.info(f'Generated {n} {regime} samples ({size}x{size}x4, seed {seed}) into {out_dir}')
        return manifest

    @staticmethod
    def load_dataset(directory: Path) -> Dataset:
        """Load a dataset container, validating its manifest."""
        dataset = read_container(Path(directory))
        logger.info(f'Loaded dataset {directory}: {len(dataset)} samples')
        return dataset
