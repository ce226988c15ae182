"""
On-disk dataset container.

A dataset directory holds ``manifest.json`` plus one raw little-endian
float32 file per array. The manifest is validated by
:class:`apps.datasets.serializers.ManifestSerializer` before any array is
mapped, and every descriptor is checked against the size of its file.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from apps.core.exceptions import DataFormatError, DataIOError, DimensionError
from apps.core.serializers import validated
from apps.datasets.serializers import ARRAY_DTYPE, ManifestSerializer

logger = logging.getLogger('icf_inverse')

MANIFEST_NAME = 'manifest.json'
MANIFEST_VERSION = 1
ITEM_SIZE = 4


@dataclass(frozen=True)
class ArrayDescriptor:
    """Location and shape of one raw array."""

    name: str
    shape: tuple[int, ...]
    file: str
    byte_offset: int = 0
    dtype: str = ARRAY_DTYPE

    @property
    def nbytes(self) -> int:
        return int(np.prod(self.shape)) * ITEM_SIZE

    def to_dict(self) -> dict[str, Any]:
        return {
            'name': self.name,
            'shape': list(self.shape),
            'dtype': self.dtype,
            'byte_offset': self.byte_offset,
            'file': self.file,
        }


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed ``manifest.json``."""

    sample_count: int
    image_extents: tuple[int, int, int]
    arrays: tuple[ArrayDescriptor, ...]
    generator_seed: int
    simulator_version: str
    version: int = MANIFEST_VERSION

    def descriptor(self, name: str) -> ArrayDescriptor:
        for descriptor in self.arrays:
            if descriptor.name == name:
                return descriptor
        raise DataFormatError(f'manifest has no array named {name!r}')

    def to_dict(self) -> dict[str, Any]:
        return {
            'version': self.version,
            'sample_count': self.sample_count,
            'image_extents': list(self.image_extents),
            'arrays': [descriptor.to_dict() for descriptor in self.arrays],
            'generator_seed': self.generator_seed,
            'simulator_version': self.simulator_version,
        }

    @classmethod
    def from_dict(cls, data: Any) -> 'DatasetManifest':
        """
        Validate and parse a manifest document.

        Raises:
            DataFormatError: If the document fails validation.
        """
        values = validated(ManifestSerializer(data=data), DataFormatError)
        return cls(
            version=values['version'],
            sample_count=values['sample_count'],
            image_extents=tuple(values['image_extents']),
            arrays=tuple(
                ArrayDescriptor(
                    name=item['name'],
                    shape=tuple(item['shape']),
                    file=item['file'],
                    byte_offset=item['byte_offset'],
                    dtype=item['dtype'],
                )
                for item in values['arrays']
            ),
            generator_seed=values['generator_seed'],
            simulator_version=values['simulator_version'],
        )


@dataclass
class Dataset:
    """
    In-memory dataset, arrays promoted to float64.

    Attributes:
        params: (n, 5) ground-truth parameters.
        images: (n, H, W, 4) images.
        scalars: (n, 15) scalar diagnostics.
        manifest: The manifest the arrays were read from, if any.
    """

    params: np.ndarray
    images: np.ndarray
    scalars: np.ndarray
    manifest: DatasetManifest | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype=np.float64)
        self.images = np.asarray(self.images, dtype=np.float64)
        self.scalars = np.asarray(self.scalars, dtype=np.float64)
        n = self.params.shape[0]
        if self.images.shape[0] != n or self.scalars.shape[0] != n:
            raise DimensionError(
                f'sample counts differ: params {n}, images {self.images.shape[0]}, '
                f'scalars {self.scalars.shape[0]}'
            )
        if self.images.ndim != 4:
            raise DimensionError(f'images must be (n, H, W, C), got {self.images.shape}')

    def __len__(self) -> int:
        return self.params.shape[0]

    @property
    def image_size(self) -> int:
        return self.images.shape[1]

    def subset(self, indices: np.ndarray) -> 'Dataset':
        """Return the samples at ``indices`` in that order."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            params=self.params[indices],
            images=self.images[indices],
            scalars=self.scalars[indices],
            manifest=self.manifest,
        )


def write_container(
    directory: Path,
    params: np.ndarray,
    images: np.ndarray,
    scalars: np.ndarray,
    generator_seed: int,
    simulator_version: str,
) -> DatasetManifest:
    """
    Write the arrays and their manifest into ``directory``.

    Output is byte-for-byte determined by the inputs.

    Raises:
        DataIOError: If the directory cannot be written.
    """
    directory = Path(directory)
    arrays = {'params': params, 'images': images, 'scalars': scalars}
    descriptors = tuple(
        ArrayDescriptor(name=name, shape=tuple(int(e) for e in array.shape), file=f'{name}.bin')
        for name, array in arrays.items()
    )
    manifest = DatasetManifest(
        sample_count=int(params.shape[0]),
        image_extents=tuple(int(e) for e in images.shape[1:]),
        arrays=descriptors,
        generator_seed=int(generator_seed),
        simulator_version=simulator_version,
    )
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for descriptor in descriptors:
            data = np.ascontiguousarray(arrays[descriptor.name], dtype=ARRAY_DTYPE)
            (directory / descriptor.file).write_bytes(data.tobytes())
        (directory / MANIFEST_NAME).write_text(
            json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + '\n'
        )
    except OSError as exc:
        raise DataIOError(f'cannot write dataset to {directory}: {exc}') from exc
    return manifest


def read_manifest(directory: Path) -> DatasetManifest:
    """
    Load and validate ``manifest.json``.

    Raises:
        DataIOError: If the manifest cannot be read.
        DataFormatError: If it is not valid JSON or fails validation.
    """
    path = Path(directory) / MANIFEST_NAME
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataIOError(f'cannot read {path}: {exc}') from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f'{path} is not valid JSON: {exc}') from exc
    return DatasetManifest.from_dict(data)


def read_container(directory: Path) -> Dataset:
    """
    Load a dataset directory.

    Raises:
        DataIOError: If a file is missing or unreadable.
        DataFormatError: If the manifest disagrees with the files on disk.
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    arrays: dict[str, np.ndarray] = {}
    for descriptor in manifest.arrays:
        path = directory / descriptor.file
        try:
            size = path.stat().st_size
        except OSError as exc:
            raise DataIOError(f'cannot read {path}: {exc}') from exc
        if descriptor.byte_offset + descriptor.nbytes > size:
            raise DataFormatError(
                f'{descriptor.name}: shape {list(descriptor.shape)} at offset '
                f'{descriptor.byte_offset} exceeds {path.name} ({size} bytes)',
                array=descriptor.name,
            )
        try:
            raw = np.fromfile(
                path,
                dtype=ARRAY_DTYPE,
                count=int(np.prod(descriptor.shape)),
                offset=descriptor.byte_offset,
            )
        except (OSError, ValueError) as exc:
            raise DataIOError(f'cannot read {path}: {exc}') from exc
        arrays[descriptor.name] = raw.reshape(descriptor.shape)

    logger.debug(f'Loaded {manifest.sample_count} samples from {directory}')
    return Dataset(
        params=arrays['params'],
        images=arrays['images'],
        scalars=arrays['scalars'],
        manifest=manifest,
    )
