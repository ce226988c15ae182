"""
Pytest configuration and fixtures for the ICF inverse-estimation toolkit.

This module provides shared fixtures for all test modules.
"""
import json

import numpy as np
import pytest

from apps.backbone.config import BackboneConfig
from apps.datasets.services import DatasetService
from apps.datasets.splits import SplitSpec
from apps.training.config import TrainConfig
from apps.training.services import TrainingService
from apps.tsh.config import TSHConfig
from tests.factories import (
    DEFAULT_EPOCHS,
    DEFAULT_SAMPLES,
    DEFAULT_SIZE,
    TINY_RUN_CONFIG,
    BackboneConfigFactory,
    SplitSpecFactory,
    TrainConfigFactory,
    TSHConfigFactory,
)


@pytest.fixture
def rng():
    """Return a seeded random generator."""
    return np.random.default_rng(0)


@pytest.fixture
def backbone_config():
    """Return a small backbone config for 8x8 images."""
    return BackboneConfigFactory()


@pytest.fixture
def tsh_config():
    """Return a small head config."""
    return TSHConfigFactory()


@pytest.fixture
def train_config():
    """Return a short training config."""
    return TrainConfigFactory(seed=0)


@pytest.fixture
def split_spec():
    """Return the default 80/10/10 split."""
    return SplitSpecFactory()


@pytest.fixture(scope='session')
def dataset_dir(tmp_path_factory):
    """Generate a 40-sample 8x8 dataset once per session."""
    directory = tmp_path_factory.mktemp('data')
    DatasetService.generate_dataset(n=40, size=8, seed=3, out_dir=directory)
    return directory


@pytest.fixture
def dataset(dataset_dir):
    """Return the session dataset loaded from disk."""
    return DatasetService.load_dataset(dataset_dir)


@pytest.fixture(scope='session')
def pretrain_dir(tmp_path_factory):
    """Generate a 20-sample dataset from the pretraining regime."""
    directory = tmp_path_factory.mktemp('pretrain_data')
    DatasetService.generate_dataset(n=20, size=8, seed=11, out_dir=directory, regime='pretrain')
    return directory


@pytest.fixture
def run_config_file(tmp_path):
    """Write the tiny RunConfig document and return its path."""
    path = tmp_path / 'run.json'
    path.write_text(json.dumps(TINY_RUN_CONFIG))
    return path


@pytest.fixture(scope='session')
def default_dataset_dir(tmp_path_factory):
    """Generate the default 2000-sample 16x16 dataset."""
    directory = tmp_path_factory.mktemp('default_data')
    DatasetService.generate_dataset(n=DEFAULT_SAMPLES, size=DEFAULT_SIZE, seed=7, out_dir=directory)
    return directory


@pytest.fixture(scope='session')
def default_pretrain_ckpt(tmp_path_factory):
    """Pretrain the default backbone on the shifted regime and return its checkpoint."""
    data_dir = tmp_path_factory.mktemp('default_pretrain_data')
    DatasetService.generate_dataset(
        n=DEFAULT_SAMPLES, size=DEFAULT_SIZE, seed=11, out_dir=data_dir, regime='pretrain'
    )
    out_dir = tmp_path_factory.mktemp('default_pretrain')
    TrainingService.pretrain_backbone(
        DatasetService.load_dataset(data_dir),
        TrainConfig(epochs=DEFAULT_EPOCHS),
        BackboneConfig(),
        TSHConfig(),
        SplitSpec(),
        out_dir,
    )
    return out_dir / 'backbone.ckpt'
