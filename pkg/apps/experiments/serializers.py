"""
Serializers for run configuration files.

Each section of a RunConfig JSON document has its own serializer; unknown
keys are rejected at every level.
"""
from typing import Any

from rest_framework import serializers

from apps.core.serializers import StrictSerializer
from apps.datasets.splits import ALLOWED_FRACTIONS


def _positive_pair(value: list[int]) -> list[int]:
    if len(value) != 2:
        raise serializers.ValidationError('Expected exactly two values.')
    return value


class TrainSectionSerializer(StrictSerializer):
    """The ``train`` section."""

    epochs = serializers.IntegerField(min_value=1, required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    lr_backbone = serializers.FloatField(min_value=0.0, required=False)
    lr_tsh = serializers.FloatField(min_value=0.0, required=False)
    weight_decay = serializers.FloatField(min_value=0.0, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    init = serializers.ChoiceField(choices=['scratch', 'checkpoint'], required=False)
    checkpoint = serializers.CharField(allow_null=True, required=False)
    warmup_epochs = serializers.IntegerField(min_value=0, required=False)
    min_lr = serializers.FloatField(min_value=0.0, required=False)


class BackboneSectionSerializer(StrictSerializer):
    """The ``backbone`` section."""

    field_extents = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=4, max_length=4, required=False
    )
    components = serializers.IntegerField(min_value=1, required=False)
    patch_size = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False)
    embed_dim = serializers.IntegerField(min_value=1, required=False)
    depth = serializers.IntegerField(min_value=1, required=False)
    heads = serializers.IntegerField(min_value=1, required=False)
    mlp_ratio = serializers.IntegerField(min_value=1, required=False)
    dropout_rate = serializers.FloatField(min_value=0.0, max_value=0.999, required=False)

    def validate_patch_size(self, value: list[int]) -> list[int]:
        return _positive_pair(value)


class TSHSectionSerializer(StrictSerializer):
    """The ``tsh`` section."""

    conv_channels = serializers.IntegerField(min_value=1, required=False)
    conv_kernel = serializers.IntegerField(min_value=1, required=False)
    dense_dims = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False)
    scalar_mlp_dims = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False)
    dropout_rate = serializers.FloatField(min_value=0.0, max_value=0.999, required=False)
    n_params_out = serializers.ChoiceField(choices=[3, 5], required=False)

    def validate_dense_dims(self, value: list[int]) -> list[int]:
        return _positive_pair(value)

    def validate_scalar_mlp_dims(self, value: list[int]) -> list[int]:
        return _positive_pair(value)


class SplitSectionSerializer(StrictSerializer):
    """The ``split`` section."""

    seed = serializers.IntegerField(min_value=0, required=False)
    ratios = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), min_length=3, max_length=3, required=False
    )
    train_fraction = serializers.FloatField(allow_null=True, required=False)

    def validate_ratios(self, value: list[float]) -> list[float]:
        if abs(sum(value) - 1.0) > 1e-9:
            raise serializers.ValidationError('Ratios must sum to 1.')
        return value

    def validate_train_fraction(self, value: float | None) -> float | None:
        if value is not None and not any(abs(value - allowed) < 1e-9 for allowed in ALLOWED_FRACTIONS):
            raise serializers.ValidationError(f'Must be one of {list(ALLOWED_FRACTIONS)}.')
        return value


class SensitivitySectionSerializer(StrictSerializer):
    """The ``sensitivity`` section."""

    n_components = serializers.IntegerField(min_value=1, required=False)
    alpha = serializers.FloatField(min_value=0.0, required=False)
    r2_threshold = serializers.FloatField(required=False)
    split_seed = serializers.IntegerField(min_value=0, required=False)


class RunConfigSerializer(StrictSerializer):
    """
    Serializer for a whole RunConfig document.

    The ``command`` section is informational: it records the command and
    flags that produced an ``effective_config.json`` and is not validated
    further.
    """

    train = TrainSectionSerializer(required=False)
    backbone = BackboneSectionSerializer(required=False)
    tsh = TSHSectionSerializer(required=False)
    split = SplitSectionSerializer(required=False)
    sensitivity = SensitivitySectionSerializer(required=False)
    command = serializers.DictField(required=False)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        train = attrs.get('train', {})
        if train.get('init') == 'checkpoint' and not train.get('checkpoint'):
            raise serializers.ValidationError({'train': 'init=checkpoint needs a checkpoint path.'})
        return attrs
