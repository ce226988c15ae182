"""
Checkpoint directories.

A checkpoint is a directory with ``header.json`` (array names, shapes and
byte offsets, the config echo, epoch, optimizer counters and generator
state) and ``params.bin``, the arrays as little-endian float64 in header
order.

Two kinds exist: ``bundle`` (backbone, head, normalization and optionally
optimizer moments) and ``backbone`` (backbone weights only, written by
pretraining).
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from apps.backbone.config import BackboneConfig
from apps.core.exceptions import DataFormatError, DataIOError
from apps.training.bundle import ModelBundle
from apps.training.optim import AdamW
from apps.tsh.config import TSHConfig

logger = logging.getLogger('icf_inverse')

HEADER_NAME = 'header.json'
PAYLOAD_NAME = 'params.bin'
PAYLOAD_DTYPE = '<f8'
FORMAT_VERSION = 1
KINDS = ('bundle', 'backbone')


@dataclass
class Checkpoint:
    """In-memory checkpoint."""

    kind: str
    config: dict[str, Any]
    arrays: dict[str, np.ndarray]
    epoch: int = 0
    optimizers: dict[str, dict[str, Any]] = field(default_factory=dict)
    rng_state: dict[str, Any] | None = None

    def section(self, prefix: str) -> dict[str, np.ndarray]:
        return {k[len(prefix):]: v for k, v in self.arrays.items() if k.startswith(prefix)}

    @property
    def backbone_config(self) -> BackboneConfig:
        return BackboneConfig.from_dict(self.config['backbone'])


def bundle_checkpoint(
    bundle: ModelBundle,
    epoch: int,
    optimizers: dict[str, AdamW] | None = None,
    rng: np.random.Generator | None = None,
    run_config: dict[str, Any] | None = None,
) -> Checkpoint:
    """Snapshot a bundle, optionally with its optimizers and generator."""
    arrays = bundle.state_dict()
    counters: dict[str, dict[str, Any]] = {}
    for group, optimizer in (optimizers or {}).items():
        state = optimizer.state
        counters[group] = {'step': state.step, 'base_lr': state.base_lr, 'weight_decay': state.weight_decay}
        for name, value in state.first.items():
            arrays[f'optim.{group}.m.{name}'] = value
        for name, value in state.second.items():
            arrays[f'optim.{group}.v.{name}'] = value
    config = {
        'backbone': bundle.backbone_cfg.to_dict(),
        'tsh': bundle.tsh_cfg.to_dict(),
        'seed': bundle.seed,
    }
    if run_config is not None:
        config['run'] = run_config
    return Checkpoint(
        kind='bundle',
        config=config,
        arrays=arrays,
        epoch=epoch,
        optimizers=counters,
        rng_state=rng.bit_generator.state if rng is not None else None,
    )


def backbone_checkpoint(bundle: ModelBundle, epoch: int, run_config: dict[str, Any] | None = None) -> Checkpoint:
    """Snapshot the backbone weights only."""
    config: dict[str, Any] = {'backbone': bundle.backbone_cfg.to_dict()}
    if run_config is not None:
        config['run'] = run_config
    arrays = {f'backbone.{k}': v for k, v in bundle.backbone.state_dict().items()}
    return Checkpoint(kind='backbone', config=config, arrays=arrays, epoch=epoch)


def save_checkpoint(checkpoint: Checkpoint, directory: Path) -> None:
    """
    Write ``header.json`` and ``params.bin``.

    Raises:
        DataIOError: If the directory cannot be written.
    """
    directory = Path(directory)
    entries = []
    offset = 0
    payload = []
    for name in sorted(checkpoint.arrays):
        array = np.ascontiguousarray(checkpoint.arrays[name], dtype=PAYLOAD_DTYPE)
        entries.append({'name': name, 'shape': list(array.shape), 'byte_offset': offset})
        offset += array.nbytes
        payload.append(array.tobytes())
    header = {
        'format_version': FORMAT_VERSION,
        'kind': checkpoint.kind,
        'epoch': checkpoint.epoch,
        'config': checkpoint.config,
        'optimizers': checkpoint.optimizers,
        'rng_state': checkpoint.rng_state,
        'dtype': PAYLOAD_DTYPE,
        'arrays': entries,
    }
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / PAYLOAD_NAME).write_bytes(b''.join(payload))
        (directory / HEADER_NAME).write_text(json.dumps(header, indent=2, sort_keys=True) + '\n')
    except OSError as exc:
        raise DataIOError(f'cannot write checkpoint {directory}: {exc}') from exc
    logger.info(f'Checkpoint ({checkpoint.kind}, epoch {checkpoint.epoch}) written to {directory}')


def load_checkpoint(directory: Path) -> Checkpoint:
    """
    Read a checkpoint directory.

    Raises:
        DataIOError: If a file is missing.
        DataFormatError: If the header is malformed or disagrees with the payload.
    """
    directory = Path(directory)
    try:
        header_text = (directory / HEADER_NAME).read_text()
        payload = (directory / PAYLOAD_NAME).read_bytes()
    except OSError as exc:
        raise DataIOError(f'cannot read checkpoint {directory}: {exc}') from exc
    try:
        header = json.loads(header_text)
        kind = header['kind']
        entries = header['arrays']
        config = header['config']
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataFormatError(f'malformed checkpoint header in {directory}: {exc}') from exc
    if header.get('format_version') != FORMAT_VERSION or kind not in KINDS:
        raise DataFormatError(f'unsupported checkpoint format in {directory}')

    arrays: dict[str, np.ndarray] = {}
    for entry in entries:
        shape = tuple(int(e) for e in entry['shape'])
        start = int(entry['byte_offset'])
        count = int(np.prod(shape))
        end = start + count * 8
        if start < 0 or end > len(payload):
            raise DataFormatError(f"array {entry['name']} exceeds the checkpoint payload")
        arrays[entry['name']] = np.frombuffer(payload, dtype=PAYLOAD_DTYPE, count=count, offset=start).reshape(shape).copy()

    return Checkpoint(
        kind=kind,
        config=config,
        arrays=arrays,
        epoch=int(header.get('epoch', 0)),
        optimizers=header.get('optimizers') or {},
        rng_state=header.get('rng_state'),
    )


def restore_bundle(checkpoint: Checkpoint) -> ModelBundle:
    """
    Rebuild a bundle from a ``bundle`` checkpoint.

    Raises:
        DataFormatError: For a backbone-only checkpoint or mismatched arrays.
    """
    if checkpoint.kind != 'bundle':
        raise DataFormatError('a backbone-only checkpoint cannot restore a full model')
    config = checkpoint.config
    bundle = ModelBundle(
        BackboneConfig.from_dict(config['backbone']),
        TSHConfig.from_dict(config['tsh']),
        seed=int(config.get('seed', 0)),
    )
    bundle.load_state_dict({k: v for k, v in checkpoint.arrays.items() if not k.startswith('optim.')})
    return bundle


def restore_optimizer(checkpoint: Checkpoint, group: str, optimizer: AdamW) -> None:
    """Load the moments and step counter of ``group`` into ``optimizer``."""
    counters = checkpoint.optimizers.get(group)
    if counters is None:
        raise DataFormatError(f'checkpoint has no optimizer state for {group}')
    optimizer.state.step = int(counters['step'])
    optimizer.state.first = checkpoint.section(f'optim.{group}.m.')
    optimizer.state.second = checkpoint.section(f'optim.{group}.v.')


def load_backbone_into(bundle: ModelBundle, checkpoint: Checkpoint) -> None:
    """
    Copy the checkpoint's backbone weights into ``bundle``; the head is untouched.

    Raises:
        DataFormatError: If the architectures differ.
    """
    if checkpoint.config.get('backbone') != bundle.backbone_cfg.to_dict():
        raise DataFormatError(
            'checkpoint backbone config differs from the model',
            checkpoint=checkpoint.config.get('backbone'),
            model=bundle.backbone_cfg.to_dict(),
        )
    bundle.backbone.load_state_dict(checkpoint.section('backbone.'))
