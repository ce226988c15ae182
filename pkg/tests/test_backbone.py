"""
Tests for the factorized-attention backbone.
"""
import numpy as np
import pytest

from apps.backbone.attention import AttentionStats, CrossFieldAttention
from apps.backbone.config import BackboneConfig
from apps.backbone.fields import FieldTensor
from apps.backbone.model import Backbone
from apps.core.exceptions import ConfigError, DimensionError
from apps.tensor_core import ops
from apps.tensor_core.gradcheck import check_parameters
from apps.tensor_core.tensor import Tape, Tensor, backward
from tests.factories import BackboneConfigFactory


def _field(rng, size=8, batch=None, components=4):
    shape = (size, size, components) if batch is None else (batch, size, size, components)
    return FieldTensor.from_images(rng.random(shape))


class TestBackboneConfig:
    """Tests for BackboneConfig validation."""

    def test_defaults_are_valid(self):
        cfg = BackboneConfig().validate()

        assert cfg.token_grid == (1, 1, 4, 4)
        assert cfg.num_tokens == 16
        assert cfg.active_axes == (2, 3)

    def test_patch_must_divide_field(self):
        with pytest.raises(ConfigError):
            BackboneConfig(field_extents=(1, 1, 10, 10), patch_size=(4, 4)).validate()

    def test_heads_must_divide_embed(self):
        with pytest.raises(ConfigError):
            BackboneConfig(embed_dim=10, heads=3).validate()

    def test_dict_round_trip(self):
        cfg = BackboneConfigFactory()

        assert BackboneConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            BackboneConfig.from_dict({'embed_dims': 8})


class TestFieldTensor:
    """Tests for FieldTensor."""

    def test_from_images_adds_degenerate_axes(self, rng):
        field = _field(rng, batch=3)

        assert field.batched
        assert field.batch_size == 3
        assert field.extents == (1, 1, 8, 8)
        assert field.images().shape == (3, 8, 8, 4)

    def test_component_mismatch(self):
        with pytest.raises(DimensionError):
            FieldTensor(Tensor(np.zeros((1, 1, 4, 4, 3))), components=4)


class TestPatchEmbed:
    """Tests for Backbone.patch_embed."""

    def test_token_grid_shape(self, rng):
        backbone = Backbone(BackboneConfigFactory(field_extents=(1, 1, 16, 16)), rng)

        tokens = backbone.patch_embed(_field(rng, size=16))

        assert tokens.shape == (1, 1, 4, 4, 8)

    def test_zero_weights_give_zero_tokens(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)
        for param in (backbone.patch_kernel, backbone.patch_bias, backbone.fuse.weight, backbone.fuse.bias):
            param.assign(np.zeros(param.shape))

        tokens = backbone.patch_embed(_field(rng))

        np.testing.assert_array_equal(tokens.data, 0.0)

    def test_embedding_kernel_gradient(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)
        field = _field(rng, batch=2)
        weights = Tensor(rng.standard_normal((2, 1, 1, 2, 2, 8)))

        errors = check_parameters(
            lambda: ops.reduce_sum(ops.mul(backbone.patch_embed(field), weights)),
            {'patch_kernel': backbone.patch_kernel, 'fuse.weight': backbone.fuse.weight},
            rng,
            entries_per_parameter=8,
        )

        assert max(errors.values()) < 1e-4


class TestAxialBlock:
    """Tests for the factorized attention block."""

    def test_output_shape(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)
        tokens = Tensor(rng.standard_normal(backbone_config.token_grid + (8,)))

        assert backbone.axial_block(tokens).shape == tokens.shape

    def test_per_axis_score_entries(self, rng):
        cfg = BackboneConfigFactory(field_extents=(1, 1, 32, 32), patch_size=(4, 4))
        backbone = Backbone(cfg, rng)
        tokens = Tensor(rng.standard_normal((1, 1, 8, 8, 8)))

        backbone.axial_block(tokens)

        assert backbone.stats.calls == 2
        assert backbone.stats.score_entries == [64, 64]
        assert backbone.stats.total_entries == 128
        assert backbone.stats.total_entries < 64 * 64

    def test_stats_cover_latest_pass_only(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)
        field = _field(rng)

        backbone.encode(field)
        first = list(backbone.stats.score_entries)
        backbone.encode(field)

        assert first
        assert backbone.stats.score_entries == first
        assert backbone.stats.calls == len(first)

    def test_degenerate_axes_are_skipped(self, rng):
        cfg = BackboneConfigFactory(field_extents=(2, 1, 8, 8), components=1)
        backbone = Backbone(cfg, rng)
        tokens = Tensor(rng.standard_normal(cfg.token_grid + (8,)))

        backbone.axial_block(tokens)

        assert cfg.active_axes == (0, 2, 3)
        assert backbone.stats.calls == 3

    def test_wrong_grid(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)

        with pytest.raises(DimensionError):
            backbone.axial_block(Tensor(np.zeros((1, 1, 3, 3, 8))))


class TestCrossFieldAttention:
    """Tests for cross-field attention."""

    def test_self_context_equals_self_attention(self, rng):
        attention = CrossFieldAttention(8, 2, rng)
        tokens = Tensor(rng.standard_normal((5, 8)))

        fused = attention(tokens, Tensor(tokens.numpy()))

        np.testing.assert_array_equal(fused.data, attention.self_attention(tokens).data)

    def test_single_context_token(self, rng):
        attention = CrossFieldAttention(8, 2, rng)
        query = Tensor(rng.standard_normal((4, 8)))
        context = Tensor(rng.standard_normal((1, 8)))
        inner = attention.attention

        fused = attention(query, context)

        value = inner.out(inner.value(context)).data
        np.testing.assert_allclose(fused.data, query.data + value, atol=1e-12)

    def test_output_keeps_query_shape(self, rng):
        attention = CrossFieldAttention(8, 2, rng)
        stats = AttentionStats()

        fused = attention(Tensor(rng.standard_normal((2, 3, 8))), Tensor(rng.standard_normal((2, 7, 8))), stats)

        assert fused.shape == (2, 3, 8)
        assert stats.score_entries == [21]

    def test_embed_mismatch(self, rng):
        attention = CrossFieldAttention(8, 2, rng)

        with pytest.raises(DimensionError):
            attention(Tensor(np.zeros((3, 8))), Tensor(np.zeros((3, 4))))


class TestEncodeReconstruct:
    """Tests for encode and reconstruct."""

    def test_token_count(self, rng):
        backbone = Backbone(BackboneConfigFactory(field_extents=(1, 1, 16, 16)), rng)

        latents = backbone.encode(_field(rng, size=16))

        assert latents.shape == (16, 8)

    def test_batched_encode(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)

        assert backbone.encode(_field(rng, batch=3)).shape == (3, 4, 8)

    def test_distinct_inputs_give_distinct_latents(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng).eval()

        for _ in range(10):
            first = backbone.encode(_field(rng)).data
            second = backbone.encode(_field(rng)).data
            assert not np.allclose(first, second)

    def test_eval_mode_is_deterministic(self, rng):
        backbone = Backbone(BackboneConfigFactory(dropout_rate=0.3), rng).eval()
        field = _field(rng)

        np.testing.assert_array_equal(backbone.encode(field).data, backbone.encode(field).data)

    def test_reconstruct_shape(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)
        field = _field(rng, batch=2)

        _, reconstruction = backbone(field)

        assert reconstruction.data.shape == field.data.shape

    def test_zero_head_gives_zero_image(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)

        _, reconstruction = backbone(_field(rng))

        np.testing.assert_array_equal(reconstruction.images(), 0.0)

    def test_token_count_mismatch(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)

        with pytest.raises(DimensionError):
            backbone.reconstruct(Tensor(np.zeros((5, 8))))

    def test_field_mismatch(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)

        with pytest.raises(DimensionError):
            backbone.encode(_field(rng, size=16))

    def test_full_model_gradients(self, rng, backbone_config):
        backbone = Backbone(backbone_config, rng)
        backbone.head.weight.assign(rng.standard_normal(backbone.head.weight.shape) * 0.1)
        field = _field(rng, batch=2)

        def loss():
            _, reconstruction = backbone(field)
            return ops.mse(reconstruction.data, field.data)

        errors = check_parameters(loss, dict(backbone.named_parameters()), rng, entries_per_parameter=2)

        assert max(errors.values()) < 1e-4

    @pytest.mark.slow
    def test_single_sample_overfit(self, rng):
        from apps.training.optim import AdamW
        from apps.training.schedule import LRSchedule, lr_at

        cfg = BackboneConfigFactory(embed_dim=16)
        backbone = Backbone(cfg, rng)
        field = _field(rng)
        optimizer = AdamW(list(backbone.named_parameters()), lr=1e-2, weight_decay=0.0)
        schedule = LRSchedule(1e-2, 500, warmup_epochs=0).validate()

        for step in range(500):
            with Tape() as tape:
                _, reconstruction = backbone(field)
                loss = ops.mse(reconstruction.data, field.data)
            backward(loss, tape)
            optimizer.step(lr_at(schedule, step))
            backbone.zero_grad()

        _, reconstruction = backbone(field)
        assert ops.mse(reconstruction.data, field.data).item() < 1e-4
