"""
Shared serializer base classes.

This module provides the strict base serializer every config and manifest
serializer derives from.
"""
from typing import Any

from rest_framework import serializers

from apps.core.exceptions import ConfigError


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data: Any) -> dict[str, Any]:
        """
        Reject unknown keys, at this level and in nested serializers.

        Args:
            data: The raw input.

        Returns:
            Validated attributes.

        Raises:
            ValidationError: If the input carries undeclared keys.
        """
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: 'Unknown key.' for key in unknown})
        return super().to_internal_value(data)


def flatten_errors(errors: Any, prefix: str = '') -> list[str]:
    """Flatten DRF's nested error structure into ``path: message`` lines."""
    if isinstance(errors, dict):
        lines = []
        for key, value in errors.items():
            path = f'{prefix}.{key}' if prefix else str(key)
            lines.extend(flatten_errors(value, path))
        return lines
    if isinstance(errors, list):
        lines = []
        for index, value in enumerate(errors):
            if isinstance(value, (dict, list)):
                lines.extend(flatten_errors(value, f'{prefix}[{index}]'))
            else:
                lines.append(f'{prefix}: {value}' if prefix else str(value))
        return lines
    return [f'{prefix}: {errors}' if prefix else str(errors)]


def validated(serializer: serializers.Serializer, error: type[Exception] = ConfigError) -> dict[str, Any]:
    """
    Run ``serializer`` and return its validated data.

    Raises:
        ``error``: With every validation message when the data is invalid.
    """
    if not serializer.is_valid():
        raise error('; '.join(flatten_errors(serializer.errors)))
    return serializer.validated_data
