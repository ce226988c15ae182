"""
End-to-end tests for the management commands.

Each test drives a command through ``call_command`` on the small session
datasets and checks the files it leaves behind and its exit codes.
"""
import json

import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from apps.experiments.config import EFFECTIVE_CONFIG_NAME

pytestmark = pytest.mark.integration

DATA_FILES = ('manifest.json', 'params.bin', 'images.bin', 'scalars.bin')


def _train(data_dir, config, out, *extra):
    call_command('train', '--data', str(data_dir), '--config', str(config), '--out', str(out), *extra)


@pytest.fixture
def run_dir(dataset_dir, run_config_file, tmp_path):
    """Train the tiny config once and return the run directory."""
    out = tmp_path / 'run'
    _train(dataset_dir, run_config_file, out)
    return out


@pytest.fixture
def pretrained(pretrain_dir, run_config_file, tmp_path):
    """Pretrain the tiny backbone and return the checkpoint path."""
    out = tmp_path / 'pretrain'
    call_command('pretrain', '--data', str(pretrain_dir), '--config', str(run_config_file), '--out', str(out))
    return out / 'backbone.ckpt'


class TestGenerateCommand:
    """Tests for the generate command."""

    def test_writes_container(self, tmp_path):
        call_command('generate', '--n', '5', '--size', '8', '--seed', '1', '--out', str(tmp_path))

        for name in DATA_FILES + (EFFECTIVE_CONFIG_NAME,):
            assert (tmp_path / name).is_file()

    def test_same_seed_same_bytes(self, tmp_path):
        for name in ('a', 'b'):
            call_command('generate', '--n', '4', '--size', '8', '--seed', '9', '--out', str(tmp_path / name))

        for name in DATA_FILES:
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_zero_samples(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command('generate', '--n', '0', '--out', str(tmp_path))

        assert excinfo.value.returncode == 2

    def test_invalid_size(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command('generate', '--n', '2', '--size', '12', '--out', str(tmp_path))

        assert excinfo.value.returncode == 2


class TestSensitivityCommand:
    """Tests for the sensitivity command."""

    def test_report_files(self, dataset_dir, tmp_path):
        call_command('sensitivity', '--data', str(dataset_dir), '--k', '4', '--out', str(tmp_path))

        frame = pd.read_csv(tmp_path / 'sensitivity.csv', index_col='feature')
        assert frame.shape == (4 + 15 + 1, 5)
        assert frame.index[-1] == 'r2'
        summary = json.loads((tmp_path / 'sensitivity.json').read_text())
        assert len(summary['weakly_identifiable']) == 5

    def test_too_many_components(self, dataset_dir, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command('sensitivity', '--data', str(dataset_dir), '--k', '2000', '--out', str(tmp_path))

        assert excinfo.value.returncode == 2

    def test_missing_dataset(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command('sensitivity', '--data', str(tmp_path / 'absent'), '--out', str(tmp_path / 'out'))

        assert excinfo.value.returncode == 3


class TestTrainCommand:
    """Tests for the train command."""

    def test_run_outputs(self, run_dir):
        for name in ('metrics.csv', 'test_metrics.json', 'pred_vs_true.csv', 'reconstructions.csv'):
            assert (run_dir / name).is_file()
        assert (run_dir / 'best.ckpt').is_dir()
        assert (run_dir / 'last.ckpt').is_dir()
        assert len(pd.read_csv(run_dir / 'metrics.csv')) == 2

    def test_effective_config_records_flags(self, run_dir):
        config = json.loads((run_dir / EFFECTIVE_CONFIG_NAME).read_text())

        assert config['command']['name'] == 'train'
        assert config['backbone']['field_extents'] == [1, 1, 8, 8]
        assert config['train']['epochs'] == 2

    def test_rerun_is_identical(self, dataset_dir, run_config_file, run_dir, tmp_path):
        _train(dataset_dir, run_config_file, tmp_path / 'again')

        assert (tmp_path / 'again' / 'metrics.csv').read_bytes() == (run_dir / 'metrics.csv').read_bytes()

    def test_flag_overrides_file(self, dataset_dir, run_config_file, tmp_path):
        _train(dataset_dir, run_config_file, tmp_path / 'one', '--epochs', '1')

        assert len(pd.read_csv(tmp_path / 'one' / 'metrics.csv')) == 1

    def test_checkpoint_init_without_path(self, dataset_dir, run_config_file, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            _train(dataset_dir, run_config_file, tmp_path / 'bad', '--init', 'checkpoint')

        assert excinfo.value.returncode == 2

    def test_unknown_config_key(self, dataset_dir, tmp_path):
        config = tmp_path / 'bad.json'
        config.write_text(json.dumps({'train': {'epoch': 2}}))

        with pytest.raises(CommandError) as excinfo:
            _train(dataset_dir, config, tmp_path / 'bad')

        assert excinfo.value.returncode == 2


class TestReportCommand:
    """Tests for the report command."""

    def test_charts(self, run_dir, tmp_path):
        call_command('report', '--run-dir', str(run_dir), '--out', str(tmp_path))

        for name in ('loss_curves', 'scatter_param1', 'scatter_param2', 'scatter_param4', 'reconstructions'):
            assert (tmp_path / f'{name}.svg').read_text().startswith('<svg')

    def test_idempotent(self, run_dir, tmp_path):
        call_command('report', '--run-dir', str(run_dir), '--out', str(tmp_path))
        first = (tmp_path / 'scatter_param2.svg').read_bytes()

        call_command('report', '--run-dir', str(run_dir), '--out', str(tmp_path))

        assert (tmp_path / 'scatter_param2.svg').read_bytes() == first

    def test_missing_metrics(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command('report', '--run-dir', str(tmp_path), '--out', str(tmp_path / 'report'))

        assert excinfo.value.returncode == 3


class TestScaleCommand:
    """Tests for the scale command."""

    def test_summary(self, dataset_dir, run_config_file, tmp_path):
        call_command(
            'scale', '--data', str(dataset_dir), '--config', str(run_config_file),
            '--fractions', '0.5,1.0', '--seeds', '1', '--out', str(tmp_path),
        )

        frame = pd.read_csv(tmp_path / 'scale_summary.csv')
        assert list(frame['fraction']) == [0.5, 1.0]
        assert list(frame['train_samples']) == [16, 32]
        assert (tmp_path / 'loss_curves.svg').is_file()
        assert (tmp_path / 'frac_0.50' / 'seed_0' / 'metrics.csv').is_file()

    def test_unsupported_fraction(self, dataset_dir, run_config_file, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command(
                'scale', '--data', str(dataset_dir), '--config', str(run_config_file),
                '--fractions', '0.3', '--out', str(tmp_path),
            )

        assert excinfo.value.returncode == 2

    def test_zero_seeds(self, dataset_dir, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command('scale', '--data', str(dataset_dir), '--seeds', '0', '--out', str(tmp_path))

        assert excinfo.value.returncode == 2


class TestCompareCommand:
    """Tests for the pretrain and compare commands."""

    def test_pretrain_writes_backbone(self, pretrained):
        assert (pretrained / 'header.json').is_file()
        assert (pretrained.parent / 'metrics.csv').is_file()

    def test_compare(self, dataset_dir, run_config_file, pretrained, tmp_path):
        call_command(
            'compare', '--data', str(dataset_dir), '--config', str(run_config_file),
            '--pretrain-ckpt', str(pretrained), '--fractions', '1.0', '--seeds', '1', '--out', str(tmp_path),
        )

        frame = pd.read_csv(tmp_path / 'compare.csv')
        assert list(frame['arm']) == ['scratch', 'finetune']
        assert frame['train_samples'].nunique() == 1
        medians = pd.read_csv(tmp_path / 'compare_medians.csv')
        assert 'gap' in medians.columns

    def test_missing_checkpoint(self, dataset_dir, run_config_file, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command(
                'compare', '--data', str(dataset_dir), '--config', str(run_config_file),
                '--pretrain-ckpt', str(tmp_path / 'absent.ckpt'), '--fractions', '1.0', '--out', str(tmp_path),
            )

        assert excinfo.value.returncode == 2

    def test_checkpoint_flag_required(self, dataset_dir, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            call_command('compare', '--data', str(dataset_dir), '--out', str(tmp_path))

        assert excinfo.value.returncode == 2
