"""
Tests for the synthetic simulator, the dataset container and the splits.
"""
import json

import numpy as np
import pytest

from apps.core.exceptions import ConfigError, DataFormatError, DataIOError, ParameterError
from apps.datasets.container import MANIFEST_NAME, read_container, read_manifest
from apps.datasets.services import DatasetService
from apps.datasets.simulator import NOISE_SIGMA, check_size, synth_forward
from apps.datasets.splits import SplitSpec, split, split_indices, subsample, subsample_indices


def _rms(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


class TestSimulator:
    """Tests for synth_forward."""

    def test_deterministic(self):
        x = np.array([0.2, 0.4, 0.6, 0.8, 0.5])

        first = synth_forward(x, noise_seed=5)
        second = synth_forward(x, noise_seed=5)

        np.testing.assert_array_equal(first[0], second[0])
        np.testing.assert_array_equal(first[1], second[1])

    def test_output_shapes(self):
        image, scalars = synth_forward(np.full(5, 0.5), noise_seed=0, size=8)

        assert image.shape == (8, 8, 4)
        assert scalars.shape == (15,)
        assert image.min() >= 0.0

    @pytest.mark.parametrize('dead', [0, 3])
    def test_dead_parameters_barely_move_outputs(self, dead):
        low = np.array([0.3, 0.5, 0.5, 0.3, 0.5])
        high = low.copy()
        high[dead] += 0.5

        image_a, scalars_a = synth_forward(low, noise_seed=9)
        image_b, scalars_b = synth_forward(high, noise_seed=9)

        assert _rms(image_a, image_b) < 1e-3
        assert _rms(scalars_a, scalars_b) < 1e-3

    def test_live_parameter_moves_image(self):
        low = np.array([0.5, 0.2, 1.0, 0.5, 0.0])
        high = low.copy()
        high[1] = 0.7

        image_a, _ = synth_forward(low, noise_seed=9, size=32)
        image_b, _ = synth_forward(high, noise_seed=9, size=32)

        assert _rms(image_a, image_b) > 10 * NOISE_SIGMA

    def test_outside_unit_cube(self):
        with pytest.raises(ParameterError):
            synth_forward(np.array([0.5, 0.5, 1.2, 0.5, 0.5]), noise_seed=0)

    @pytest.mark.parametrize('size', [4, 12, 128])
    def test_invalid_size(self, size):
        with pytest.raises(ParameterError):
            check_size(size)


class TestGenerateDataset:
    """Tests for DatasetService.generate_dataset and load_dataset."""

    def test_manifest_and_shapes(self, tmp_path):
        manifest = DatasetService.generate_dataset(n=10, size=8, seed=1, out_dir=tmp_path)
        dataset = DatasetService.load_dataset(tmp_path)

        assert manifest.sample_count == 10
        assert dataset.params.shape == (10, 5)
        assert dataset.images.shape == (10, 8, 8, 4)
        assert dataset.scalars.shape == (10, 15)

    def test_byte_identical_for_same_seed(self, tmp_path):
        DatasetService.generate_dataset(n=6, size=8, seed=4, out_dir=tmp_path / 'a')
        DatasetService.generate_dataset(n=6, size=8, seed=4, out_dir=tmp_path / 'b')

        for name in (MANIFEST_NAME, 'params.bin', 'images.bin', 'scalars.bin'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_parameter_means(self):
        params = DatasetService.sample_parameters(2000, seed=0)

        np.testing.assert_allclose(params.mean(axis=0), 0.5, atol=0.03)

    def test_pretrain_regime_range(self):
        params = DatasetService.sample_parameters(500, seed=0, regime='pretrain')

        assert params.max() <= 0.5

    def test_unknown_regime(self):
        with pytest.raises(ParameterError):
            DatasetService.sample_parameters(5, seed=0, regime='shifted')

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataIOError):
            DatasetService.load_dataset(tmp_path / 'missing')


class TestManifestValidation:
    """Tests for manifest and payload consistency checks."""

    @pytest.fixture
    def container(self, tmp_path):
        DatasetService.generate_dataset(n=4, size=8, seed=2, out_dir=tmp_path)
        return tmp_path

    def _edit(self, directory, change):
        path = directory / MANIFEST_NAME
        data = json.loads(path.read_text())
        change(data)
        path.write_text(json.dumps(data))

    def test_round_trip(self, container):
        manifest = read_manifest(container)

        assert manifest.image_extents == (8, 8, 4)
        assert len(read_container(container)) == 4

    def test_offset_beyond_file(self, container):
        def shift(data):
            for item in data['arrays']:
                if item['name'] == 'images':
                    item['byte_offset'] = 100
        self._edit(container, shift)

        with pytest.raises(DataFormatError):
            read_container(container)

    def test_shape_disagrees_with_count(self, container):
        def grow(data):
            for item in data['arrays']:
                if item['name'] == 'images':
                    item['shape'][0] = 40
        self._edit(container, grow)

        with pytest.raises(DataFormatError):
            read_container(container)

    def test_unknown_key(self, container):
        self._edit(container, lambda data: data.update(extra=1))

        with pytest.raises(DataFormatError):
            read_manifest(container)

    def test_invalid_json(self, container):
        (container / MANIFEST_NAME).write_text('{not json')

        with pytest.raises(DataFormatError):
            read_manifest(container)


class TestSplits:
    """Tests for split and subsample."""

    def test_split_sizes(self):
        train, val, test = split_indices(2000, SplitSpec(seed=0))

        assert (len(train), len(val), len(test)) == (1600, 200, 200)
        assert len(np.intersect1d(train, val)) == 0
        assert len(np.intersect1d(train, test)) == 0

    def test_fraction_count(self):
        train, _, _ = split_indices(2000, SplitSpec(seed=0))

        assert len(subsample_indices(train, 0.05, seed=1)) == 80

    def test_nested_fractions(self):
        train = np.arange(1600)

        small = set(subsample_indices(train, 0.05, seed=3))
        larger = set(subsample_indices(train, 0.10, seed=3))

        assert small < larger

    def test_unsupported_fraction(self):
        with pytest.raises(ConfigError):
            subsample_indices(np.arange(10), 0.3, seed=0)

    def test_ratios_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            SplitSpec(ratios=(0.8, 0.1, 0.2)).validate()

    def test_split_with_fraction(self, dataset):
        train, val, test = split(dataset, SplitSpec(seed=0, train_fraction=0.5))

        assert (len(train), len(val), len(test)) == (16, 4, 4)
        assert len(subsample(train, 0.25, seed=0)) == 4
