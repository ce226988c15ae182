"""
Tests for the schedule, the optimizer, the joint trainer, checkpoints and
evaluation.
"""
import json

import numpy as np
import pytest

from apps.backbone.config import BackboneConfig
from apps.core.exceptions import ConfigError, DataFormatError, DimensionError, ParameterError
from apps.datasets.container import Dataset
from apps.datasets.services import DatasetService
from apps.datasets.splits import SplitSpec, split
from apps.training.bundle import ModelBundle
from apps.training.checkpoint import (
    HEADER_NAME,
    backbone_checkpoint,
    bundle_checkpoint,
    load_backbone_into,
    load_checkpoint,
    restore_bundle,
    restore_optimizer,
    save_checkpoint,
)
from apps.training.config import TrainConfig
from apps.training.evaluation import evaluate, predict, score_predictions
from apps.training.metrics import COLUMNS, MetricsLog
from apps.training.optim import AdamW, OptimizerState, adamw_step
from apps.training.schedule import LRSchedule, lr_at
from apps.training.services import TrainingService
from apps.training.trainer import build_optimizers, train_joint
from apps.tsh.config import TSHConfig
from tests.factories import DEFAULT_EPOCHS, BackboneConfigFactory, TrainConfigFactory, TSHConfigFactory


def _bundle(seed=0, **tsh):
    return ModelBundle(BackboneConfigFactory(), TSHConfigFactory(**tsh), seed=seed)


class TestSchedule:
    """Tests for lr_at."""

    def test_end_of_warmup_is_base(self):
        schedule = LRSchedule(1e-4, 100)

        assert lr_at(schedule, 5) == 1e-4

    def test_final_epoch_is_floor(self):
        schedule = LRSchedule(1e-4, 100)

        assert lr_at(schedule, 99) == pytest.approx(1e-7, abs=1e-12)

    def test_final_epoch_floor_when_warmup_ends_there(self):
        schedule = LRSchedule(1e-4, 6, warmup_epochs=5).validate()

        assert lr_at(schedule, 4) == pytest.approx(1e-7 + (1e-4 - 1e-7) * 4 / 5)
        assert lr_at(schedule, 5) == 1e-7

    def test_single_epoch_run_uses_base(self):
        assert lr_at(LRSchedule(1e-3, 1, warmup_epochs=0), 0) == 1e-3

    def test_decay_midpoint(self):
        schedule = LRSchedule(1e-4, 100, warmup_epochs=5)

        assert lr_at(schedule, 52) == pytest.approx((1e-4 + 1e-7) / 2, abs=1e-12)

    def test_warmup_starts_at_floor(self):
        assert lr_at(LRSchedule(1e-3, 20, warmup_epochs=4), 0) == 1e-7

    def test_frozen_group(self):
        schedule = LRSchedule(0.0, 10)

        assert all(lr_at(schedule, epoch) == 0.0 for epoch in range(10))

    def test_epoch_out_of_range(self):
        with pytest.raises(ParameterError):
            lr_at(LRSchedule(1e-4, 10), 10)

    def test_warmup_longer_than_run(self):
        with pytest.raises(ConfigError):
            LRSchedule(1e-4, 5, warmup_epochs=5).validate()


class TestAdamW:
    """Tests for adamw_step and AdamW."""

    def test_zero_grad_no_decay(self):
        theta = np.array([1.0, -2.0])

        out = adamw_step({'w': theta}, {'w': np.zeros(2)}, OptimizerState(0.1, weight_decay=0.0), lr=0.1)

        np.testing.assert_array_equal(out['w'], theta)

    def test_first_step_hand_value(self):
        out = adamw_step({'w': np.zeros(1)}, {'w': np.ones(1)}, OptimizerState(0.1, weight_decay=0.0), lr=0.1)

        assert out['w'][0] == pytest.approx(-0.1, abs=1e-6)

    def test_decoupled_decay(self):
        theta = np.array([2.0, -4.0])

        out = adamw_step({'w': theta}, {'w': np.zeros(2)}, OptimizerState(0.1, weight_decay=0.01), lr=0.1)

        np.testing.assert_allclose(out['w'], 0.999 * theta)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            adamw_step({'w': np.zeros(2)}, {'w': np.zeros(3)}, OptimizerState(0.1), lr=0.1)

    def test_zero_lr_leaves_state(self):
        bundle = _bundle()
        optimizer = AdamW(list(bundle.head.named_parameters()), lr=0.0)
        before = bundle.head.state_dict()

        optimizer.step(0.0)

        assert optimizer.state.step == 0
        for name, value in bundle.head.state_dict().items():
            np.testing.assert_array_equal(value, before[name])


class TestTrainConfig:
    """Tests for TrainConfig validation."""

    def test_checkpoint_init_needs_path(self):
        with pytest.raises(ConfigError):
            TrainConfig(init='checkpoint').validate()

    def test_lr_below_floor(self):
        with pytest.raises(ConfigError):
            TrainConfig(lr_backbone=1e-8).validate()

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({'epoch': 3})


class TestModelBundle:
    """Tests for ModelBundle."""

    def test_optimizer_groups_are_disjoint(self, train_config):
        bundle = _bundle()

        optimizers = build_optimizers(bundle, train_config)

        assert not optimizers['backbone'].ids() & optimizers['tsh'].ids()
        total = len(optimizers['backbone'].parameters) + len(optimizers['tsh'].parameters)
        assert total == len(bundle.backbone.parameters()) + len(bundle.head.parameters())

    def test_same_seed_same_head(self):
        first, second = _bundle(seed=4), _bundle(seed=4)

        for name, value in first.head.state_dict().items():
            np.testing.assert_array_equal(value, second.head.state_dict()[name])

    def test_inputs_are_standardized(self, dataset):
        bundle = _bundle()
        bundle.fit_normalization(dataset)

        _, scalars, targets = bundle.inputs(dataset, np.arange(len(dataset)))

        np.testing.assert_allclose(scalars.data.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(targets.data.std(axis=0), 1.0, atol=1e-9)
        assert targets.shape == (len(dataset), 3)

    def test_field_size_mismatch(self, dataset):
        bundle = ModelBundle(BackboneConfigFactory(field_extents=(1, 1, 16, 16)), TSHConfigFactory())

        with pytest.raises(DimensionError):
            bundle.inputs(dataset, np.arange(2))


class TestTrainJoint:
    """Tests for train_joint."""

    def test_log_has_one_row_per_epoch(self, dataset, split_spec, train_config):
        train, val, _ = split(dataset, split_spec)

        result = train_joint(_bundle(), train, val, train_config)

        assert len(result.log) == train_config.epochs
        assert list(result.log.to_frame().columns) == list(COLUMNS)
        assert 0 <= result.best_epoch < train_config.epochs

    def test_deterministic(self, dataset, split_spec, train_config):
        train, val, _ = split(dataset, split_spec)

        first = train_joint(_bundle(), train, val, train_config)
        second = train_joint(_bundle(), train, val, train_config)

        assert first.log.rows == second.log.rows

    def test_frozen_head(self, dataset, split_spec):
        train, val, _ = split(dataset, split_spec)
        bundle = _bundle()
        head_before = bundle.head.state_dict()
        backbone_before = bundle.backbone.state_dict()

        train_joint(bundle, train, val, TrainConfigFactory(lr_tsh=0.0, epochs=2))

        for name, value in bundle.head.state_dict().items():
            np.testing.assert_array_equal(value, head_before[name])
        changed = [
            name for name, value in bundle.backbone.state_dict().items()
            if not np.array_equal(value, backbone_before[name])
        ]
        assert changed

    def test_reconstruction_objective_leaves_head(self, dataset, split_spec, train_config):
        train, val, _ = split(dataset, split_spec)
        bundle = _bundle()
        head_before = bundle.head.state_dict()

        result = train_joint(bundle, train, val, train_config, objective='reconstruction')

        for name, value in bundle.head.state_dict().items():
            np.testing.assert_array_equal(value, head_before[name])
        assert np.isnan(result.log.last['tsh_train_mse'])

    def test_empty_validation_split(self, dataset, train_config):
        with pytest.raises(ParameterError):
            train_joint(_bundle(), dataset, dataset.subset(np.array([], dtype=int)), train_config)

    def test_unknown_objective(self, dataset, train_config):
        with pytest.raises(ParameterError):
            train_joint(_bundle(), dataset, dataset, train_config, objective='regression')

    @pytest.mark.slow
    def test_single_sample_overfit(self, dataset):
        one = dataset.subset(np.array([0]))
        bundle = ModelBundle(BackboneConfigFactory(embed_dim=16), TSHConfigFactory(n_params_out=3), seed=0)
        cfg = TrainConfig(
            epochs=500,
            batch_size=1,
            lr_backbone=1e-2,
            lr_tsh=1e-2,
            weight_decay=0.0,
            warmup_epochs=0,
        )

        result = train_joint(bundle, one, one, cfg)

        assert result.log.last['backbone_train_mse'] < 1e-4
        assert result.log.last['tsh_train_mse'] < 1e-4


class TestCheckpoint:
    """Tests for checkpoint save and load."""

    def test_bundle_round_trip(self, dataset, split_spec, train_config, tmp_path):
        train, val, _ = split(dataset, split_spec)
        bundle = _bundle()
        result = train_joint(bundle, train, val, train_config)

        save_checkpoint(bundle_checkpoint(bundle, 2, result.optimizers, result.rng), tmp_path / 'last.ckpt')
        checkpoint = load_checkpoint(tmp_path / 'last.ckpt')
        restored = restore_bundle(checkpoint)

        for name, value in bundle.state_dict().items():
            np.testing.assert_array_equal(restored.state_dict()[name], value)
        optimizer = AdamW(list(restored.head.named_parameters()), lr=1e-3)
        restore_optimizer(checkpoint, 'tsh', optimizer)
        assert optimizer.state.step == result.optimizers['tsh'].state.step
        assert checkpoint.rng_state == result.rng.bit_generator.state

    def test_restored_bundle_evaluates_identically(self, dataset, split_spec, train_config, tmp_path):
        train, val, test = split(dataset, split_spec)
        bundle = _bundle()
        result = train_joint(bundle, train, val, train_config)
        save_checkpoint(bundle_checkpoint(bundle, 2, result.optimizers, result.rng), tmp_path / 'last.ckpt')

        restored = restore_bundle(load_checkpoint(tmp_path / 'last.ckpt'))
        metrics, predictions = evaluate(bundle, test)
        restored_metrics, restored_predictions = evaluate(restored, test)

        assert restored_metrics == metrics
        assert np.array_equal(restored_predictions.parameters, predictions.parameters)
        assert np.array_equal(restored_predictions.reconstructions, predictions.reconstructions)

    def test_backbone_into_fresh_bundle(self, tmp_path):
        source = _bundle(seed=1)
        save_checkpoint(backbone_checkpoint(source, 0), tmp_path / 'backbone.ckpt')
        target = _bundle(seed=2)
        head_before = target.head.state_dict()

        load_backbone_into(target, load_checkpoint(tmp_path / 'backbone.ckpt'))

        for name, value in source.backbone.state_dict().items():
            np.testing.assert_array_equal(target.backbone.state_dict()[name], value)
        for name, value in target.head.state_dict().items():
            np.testing.assert_array_equal(value, head_before[name])

    def test_backbone_checkpoint_cannot_restore_bundle(self, tmp_path):
        save_checkpoint(backbone_checkpoint(_bundle(), 0), tmp_path / 'backbone.ckpt')

        with pytest.raises(DataFormatError):
            restore_bundle(load_checkpoint(tmp_path / 'backbone.ckpt'))

    def test_architecture_mismatch(self, tmp_path):
        save_checkpoint(backbone_checkpoint(_bundle(), 0), tmp_path / 'backbone.ckpt')
        other = ModelBundle(BackboneConfigFactory(embed_dim=16), TSHConfigFactory())

        with pytest.raises(DataFormatError):
            load_backbone_into(other, load_checkpoint(tmp_path / 'backbone.ckpt'))

    def test_truncated_payload(self, tmp_path):
        directory = tmp_path / 'backbone.ckpt'
        save_checkpoint(backbone_checkpoint(_bundle(), 0), directory)
        payload = (directory / 'params.bin').read_bytes()
        (directory / 'params.bin').write_bytes(payload[:-8])

        with pytest.raises(DataFormatError):
            load_checkpoint(directory)

    def test_header_is_json(self, tmp_path):
        save_checkpoint(backbone_checkpoint(_bundle(), 3), tmp_path / 'ckpt')

        header = json.loads((tmp_path / 'ckpt' / HEADER_NAME).read_text())

        assert header['kind'] == 'backbone'
        assert header['epoch'] == 3


class TestEvaluation:
    """Tests for evaluate and score_predictions."""

    def test_perfect_predictions(self):
        truth = np.array([[0.1, 0.5], [0.4, 0.2], [0.9, 0.7]])

        metrics = score_predictions(truth, truth.copy(), (1, 2), 0.0, 0.0)

        assert metrics['r2_param1'] == 1.0
        assert metrics['rel_l2_param2'] == 0.0

    def test_mean_predictor_scores_zero(self, rng):
        truth = rng.random((2000, 1))
        fit_mean = rng.random((2000, 1)).mean(axis=0)

        metrics = score_predictions(truth, np.broadcast_to(fit_mean, truth.shape).copy(), (1,), 0.0, 0.0)

        assert abs(metrics['r2_param1']) < 0.02

    def test_evaluate_is_deterministic(self, dataset):
        bundle = _bundle()
        bundle.fit_normalization(dataset)
        test = dataset.subset(np.arange(5))

        first, _ = evaluate(bundle, test)
        second, _ = evaluate(bundle, test)

        assert first == second
        assert {'recon_mse', 'reg_mse', 'r2_param1', 'r2_param2', 'r2_param4'} <= set(first)

    def test_empty_split(self):
        empty = Dataset(params=np.zeros((0, 5)), images=np.zeros((0, 8, 8, 4)), scalars=np.zeros((0, 15)))

        with pytest.raises(ParameterError):
            evaluate(_bundle(), empty)


class TestMetricsLog:
    """Tests for MetricsLog CSV serialization."""

    def test_csv_round_trip(self, tmp_path):
        log = MetricsLog()
        log.append(
            epoch=0, lr_backbone=1e-4, lr_tsh=1e-5, backbone_train_mse=0.1,
            backbone_val_mse=0.2, tsh_train_mse=0.3, tsh_val_mse=1 / 3,
        )

        log.write_csv(tmp_path / 'metrics.csv')

        assert MetricsLog.read_csv(tmp_path / 'metrics.csv').rows == log.rows

    def test_missing_column(self):
        with pytest.raises(DataFormatError):
            MetricsLog().append(epoch=0)


class TestTrainingService:
    """Tests for TrainingService run directories."""

    def test_train_run_outputs(self, dataset, split_spec, train_config, tmp_path):
        outcome = TrainingService.train_run(
            dataset, train_config, BackboneConfigFactory(), TSHConfigFactory(), split_spec, tmp_path
        )

        for name in ('metrics.csv', 'test_metrics.json', 'pred_vs_true.csv', 'reconstructions.csv'):
            assert (tmp_path / name).is_file()
        assert (tmp_path / 'last.ckpt' / HEADER_NAME).is_file()
        assert (tmp_path / 'best.ckpt' / HEADER_NAME).is_file()
        metrics = json.loads((tmp_path / 'test_metrics.json').read_text())
        assert {f'r2_param{i}' for i in (1, 2, 4)} <= set(metrics)
        assert {f'rel_l2_param{i}' for i in (1, 2, 4)} <= set(metrics)
        assert outcome.train_samples == 32

    def test_finetune_starts_from_checkpoint(self, dataset, split_spec, tmp_path):
        backbone_cfg = TrainingService.fit_backbone_config(BackboneConfigFactory(), dataset)
        checkpoint = TrainingService.pretrain_backbone(
            dataset, TrainConfigFactory(epochs=2, seed=0), backbone_cfg, TSHConfigFactory(), split_spec, tmp_path
        )
        cfg = TrainConfigFactory(init='checkpoint', checkpoint=str(tmp_path / 'backbone.ckpt'), seed=0)

        bundle = TrainingService.build_bundle(backbone_cfg, TSHConfigFactory(), cfg)

        for name, value in checkpoint.section('backbone.').items():
            np.testing.assert_array_equal(bundle.backbone.state_dict()[name], value)


@pytest.fixture(scope='module')
def default_run(default_dataset_dir, tmp_path_factory):
    """Train the default model for the default epoch count and keep its test split."""
    dataset = DatasetService.load_dataset(default_dataset_dir)
    outcome = TrainingService.train_run(
        dataset,
        TrainConfig(epochs=DEFAULT_EPOCHS),
        BackboneConfig(),
        TSHConfig(),
        SplitSpec(),
        tmp_path_factory.mktemp('default_run'),
    )
    train, _, test = split(dataset, SplitSpec())
    return outcome, train, test


def _untrained(train):
    bundle = ModelBundle(TrainingService.fit_backbone_config(BackboneConfig(), train), TSHConfig(), seed=0)
    bundle.fit_normalization(train)
    return bundle


@pytest.mark.slow
@pytest.mark.integration
class TestDefaultTraining:
    """Outcomes of a full default-size training run."""

    def test_train_split_size(self, default_run):
        outcome, _, _ = default_run

        assert outcome.train_samples == 1600

    @pytest.mark.parametrize('index', [1, 2, 4])
    def test_live_parameters_recovered(self, default_run, index):
        outcome, _, _ = default_run

        assert outcome.test_metrics[f'r2_param{index}'] > 0.8

    def test_reconstruction_beats_untrained(self, default_run):
        outcome, train, test = default_run

        baseline = predict(_untrained(train), test).recon_mse

        assert outcome.test_metrics['recon_mse'] * 10 <= baseline


@pytest.mark.slow
@pytest.mark.integration
class TestPretrainTransfer:
    """Reconstruction of finetune-regime data by a backbone pretrained on the shifted regime."""

    def test_pretrained_reconstructs_better(self, default_dataset_dir, default_pretrain_ckpt):
        dataset = DatasetService.load_dataset(default_dataset_dir)
        train, val, _ = split(dataset, SplitSpec())
        untrained = _untrained(train)
        pretrained = _untrained(train)
        load_backbone_into(pretrained, load_checkpoint(default_pretrain_ckpt))

        assert predict(pretrained, val).recon_mse * 2 <= predict(untrained, val).recon_mse
