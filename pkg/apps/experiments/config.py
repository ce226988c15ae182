"""
Typed run configuration assembled from a JSON file and command-line flags.
"""
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from django.conf import settings

from apps.backbone.config import BackboneConfig
from apps.core.exceptions import ConfigError, DataIOError
from apps.core.serializers import validated
from apps.datasets.splits import SplitSpec
from apps.experiments.serializers import RunConfigSerializer
from apps.training.config import TrainConfig
from apps.tsh.config import TSHConfig

EFFECTIVE_CONFIG_NAME = 'effective_config.json'


@dataclass(frozen=True)
class SensitivitySettings:
    """Settings of the sensitivity stage."""

    n_components: int = 32
    alpha: float = 1.0
    r2_threshold: float = 0.2
    split_seed: int = 0

    @classmethod
    def defaults(cls) -> 'SensitivitySettings':
        config = settings.ICF_INVERSE
        return cls(
            n_components=config.get('SENSITIVITY_COMPONENTS', 32),
            alpha=config.get('SENSITIVITY_LAMBDA', 1.0),
            r2_threshold=config.get('R2_THRESHOLD', 0.2),
        )


@dataclass(frozen=True)
class RunConfig:
    """One validated configuration per run, echoed as ``effective_config.json``."""

    train: TrainConfig = field(default_factory=TrainConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    tsh: TSHConfig = field(default_factory=TSHConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    sensitivity: SensitivitySettings = field(default_factory=SensitivitySettings.defaults)
    command: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Any) -> 'RunConfig':
        """
        Validate a RunConfig document.

        Raises:
            ConfigError: On unknown keys or invalid values.
        """
        values = validated(RunConfigSerializer(data=data))
        return cls.from_sections(values)

    @classmethod
    def from_sections(cls, values: dict[str, Any]) -> 'RunConfig':
        split = dict(values.get('split', {}))
        if 'ratios' in split:
            split['ratios'] = tuple(split['ratios'])
        sensitivity = dataclasses.asdict(SensitivitySettings.defaults())
        sensitivity.update(values.get('sensitivity', {}))
        try:
            return cls(
                train=TrainConfig.from_dict(dict(values.get('train', {}))),
                backbone=BackboneConfig.from_dict(dict(values.get('backbone', {}))),
                tsh=TSHConfig.from_dict(dict(values.get('tsh', {}))),
                split=SplitSpec(**split).validate(),
                sensitivity=SensitivitySettings(**sensitivity),
                command=dict(values.get('command', {})),
            )
        except TypeError as exc:
            raise ConfigError(f'invalid run config: {exc}') from exc

    @classmethod
    def load(cls, path: Path | None, overrides: dict[str, dict[str, Any]] | None = None) -> 'RunConfig':
        """
        Read ``path`` (if given) and apply flag ``overrides`` section by section.

        Raises:
            DataIOError: If the file cannot be read.
            ConfigError: If it is not valid JSON or fails validation.
        """
        data: dict[str, Any] = {}
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise DataIOError(f'cannot read config {path}: {exc}') from exc
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f'{path} is not valid JSON: {exc}') from exc
            if not isinstance(data, dict):
                raise ConfigError(f'{path} must hold a JSON object')
        for section, values in (overrides or {}).items():
            present = {k: v for k, v in values.items() if v is not None}
            if present:
                data.setdefault(section, {})
                if not isinstance(data[section], dict):
                    raise ConfigError(f'section {section} must be an object')
                data[section] = {**data[section], **present}
        return cls.from_dict(data)

    def replace(self, **sections: Any) -> 'RunConfig':
        return dataclasses.replace(self, **sections)

    def to_dict(self) -> dict[str, Any]:
        split = dataclasses.asdict(self.split)
        split['ratios'] = list(self.split.ratios)
        return {
            'train': self.train.to_dict(),
            'backbone': self.backbone.to_dict(),
            'tsh': self.tsh.to_dict(),
            'split': split,
            'sensitivity': dataclasses.asdict(self.sensitivity),
            'command': self.command,
        }

    def write(self, directory: Path) -> Path:
        """Write ``effective_config.json`` into ``directory``."""
        path = Path(directory) / EFFECTIVE_CONFIG_NAME
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n')
        except OSError as exc:
            raise DataIOError(f'cannot write {path}: {exc}') from exc
        return path


def config_diff(left: dict[str, Any], right: dict[str, Any], prefix: str = '') -> list[str]:
    """Dotted paths whose values differ between two config dicts."""
    paths = []
    for key in sorted(set(left) | set(right)):
        path = f'{prefix}{key}'
        a, b = left.get(key), right.get(key)
        if isinstance(a, dict) and isinstance(b, dict):
            paths.extend(config_diff(a, b, f'{path}.'))
        elif a != b:
            paths.append(path)
    return paths
