"""
Serializers for the dataset container manifest.

This module validates ``manifest.json`` documents before any array is
read.
"""
from typing import Any

from rest_framework import serializers

from apps.core.serializers import StrictSerializer

ARRAY_NAMES = ('params', 'images', 'scalars')
ARRAY_DTYPE = '<f4'


class ArrayDescriptorSerializer(StrictSerializer):
    """One raw array inside the container."""

    name = serializers.ChoiceField(choices=ARRAY_NAMES)
    shape = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    dtype = serializers.ChoiceField(choices=[ARRAY_DTYPE])
    byte_offset = serializers.IntegerField(min_value=0)
    file = serializers.CharField()

    def validate_file(self, value: str) -> str:
        """Keep array files inside the dataset directory."""
        if '/' in value or '\\' in value or value.startswith('.'):
            raise serializers.ValidationError('Array files must be plain file names.')
        return value


class ManifestSerializer(StrictSerializer):
    """
    Serializer for ``manifest.json``.

    Cross-field checks: descriptors cover exactly the three arrays, their
    leading extent equals the sample count, image shapes agree with the
    declared extents, and descriptors sharing a file do not overlap.
    """

    version = serializers.IntegerField(min_value=1)
    sample_count = serializers.IntegerField(min_value=1)
    image_extents = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=3, max_length=3
    )
    arrays = ArrayDescriptorSerializer(many=True)
    generator_seed = serializers.IntegerField()
    simulator_version = serializers.CharField()

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        attrs = super().validate(attrs)
        arrays = attrs['arrays']
        names = sorted(descriptor['name'] for descriptor in arrays)
        if names != sorted(ARRAY_NAMES):
            raise serializers.ValidationError({'arrays': f'Expected exactly {list(ARRAY_NAMES)}.'})

        count = attrs['sample_count']
        expected = {
            'params': [count, 5],
            'images': [count, *attrs['image_extents']],
            'scalars': [count, 15],
        }
        for descriptor in arrays:
            if list(descriptor['shape']) != expected[descriptor['name']]:
                raise serializers.ValidationError({
                    'arrays': (
                        f"{descriptor['name']} has shape {descriptor['shape']}, "
                        f"expected {expected[descriptor['name']]}."
                    )
                })

        spans: dict[str, list[tuple[int, int]]] = {}
        for descriptor in arrays:
            size = 4
            for extent in descriptor['shape']:
                size *= extent
            start = descriptor['byte_offset']
            spans.setdefault(descriptor['file'], []).append((start, start + size))
        for file_spans in spans.values():
            file_spans.sort()
            for (_, end), (start, _) in zip(file_spans, file_spans[1:]):
                if start < end:
                    raise serializers.ValidationError({'arrays': 'Array byte ranges overlap.'})
        return attrs
