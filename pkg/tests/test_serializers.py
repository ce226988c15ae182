"""
Serializer tests for run configuration files.

This module contains unit tests for RunConfig validation and loading.
"""
import json

import pytest

from apps.core.exceptions import ConfigError, DataIOError, ParameterError
from apps.core.management.base import parse_fractions
from apps.core.serializers import flatten_errors, validated
from apps.experiments.config import EFFECTIVE_CONFIG_NAME, RunConfig, config_diff
from apps.experiments.serializers import RunConfigSerializer, TrainSectionSerializer
from tests.factories import TINY_RUN_CONFIG


class TestRunConfigSerializer:
    """Tests for RunConfigSerializer."""

    def test_valid_document(self):
        serializer = RunConfigSerializer(data=TINY_RUN_CONFIG)

        assert serializer.is_valid(), serializer.errors

    def test_unknown_section(self):
        serializer = RunConfigSerializer(data={'model': {}})

        assert not serializer.is_valid()
        assert 'model' in serializer.errors

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError, match='train.epoch'):
            RunConfig.from_dict({'train': {'epoch': 3}})

    def test_negative_learning_rate(self):
        assert not TrainSectionSerializer(data={'lr_backbone': -1.0}).is_valid()

    def test_checkpoint_init_needs_path(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'train': {'init': 'checkpoint'}})

    def test_ratios_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'split': {'ratios': [0.5, 0.1, 0.1]}})

    def test_unsupported_fraction(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'split': {'train_fraction': 0.3}})

    @pytest.mark.parametrize('count', [2, 4])
    def test_output_count(self, count):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'tsh': {'n_params_out': count}})


class TestFlattenErrors:
    """Tests for flatten_errors and validated."""

    def test_nested_paths(self):
        errors = {'train': {'epoch': ['Unknown key.']}, 'split': ['Bad.']}

        assert flatten_errors(errors) == ['train.epoch: Unknown key.', 'split: Bad.']

    def test_validated_uses_given_error(self):
        with pytest.raises(ParameterError):
            validated(TrainSectionSerializer(data={'epochs': 0}), ParameterError)


class TestRunConfigLoad:
    """Tests for RunConfig.load."""

    def test_defaults_without_file(self, settings):
        config = RunConfig.load(None)

        assert config.sensitivity.n_components == settings.ICF_INVERSE['SENSITIVITY_COMPONENTS']
        assert config.train.epochs == 100

    def test_overrides_win(self, run_config_file):
        config = RunConfig.load(run_config_file, {'train': {'epochs': 5, 'seed': None}})

        assert config.train.epochs == 5
        assert config.train.seed == 0
        assert config.backbone.embed_dim == 8

    def test_override_creates_section(self, run_config_file):
        config = RunConfig.load(run_config_file, {'split': {'train_fraction': 0.5}})

        assert config.split.train_fraction == 0.5
        assert config.split.seed == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIOError):
            RunConfig.load(tmp_path / 'absent.json')

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text('{"train": ')

        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_not_an_object(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text('[1, 2]')

        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_effective_config_reloads(self, run_config_file, tmp_path):
        config = RunConfig.load(run_config_file).replace(command={'name': 'train', 'flags': {'seed': 1}})

        path = config.write(tmp_path / 'out')

        assert path.name == EFFECTIVE_CONFIG_NAME
        assert RunConfig.load(path).to_dict() == config.to_dict()
        assert json.loads(path.read_text())['command']['name'] == 'train'


class TestConfigDiff:
    """Tests for config_diff."""

    def test_identical(self):
        assert config_diff(TINY_RUN_CONFIG, TINY_RUN_CONFIG) == []

    def test_nested_and_missing_keys(self):
        left = {'a': 1, 'b': {'c': 2}}
        right = {'a': 1, 'b': {'c': 3}, 'd': 0}

        assert config_diff(left, right) == ['b.c', 'd']


class TestParseFractions:
    """Tests for parse_fractions."""

    def test_comma_list(self):
        assert parse_fractions('0.05, 0.10,1.0') == [0.05, 0.10, 1.0]

    @pytest.mark.parametrize('text', ['', ' , ', 'half,1.0'])
    def test_invalid(self, text):
        with pytest.raises(ParameterError):
            parse_fractions(text)
