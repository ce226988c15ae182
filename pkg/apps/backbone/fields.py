"""
Field container in the (T, D, H, W, C) layout.
"""
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import DimensionError
from apps.tensor_core.tensor import Tensor


@dataclass(frozen=True)
class FieldTensor:
    """
    One field, or a batch of fields, over time, depth, height and width.

    ``data`` is ``(T, D, H, W, C)`` for a single field or
    ``(B, T, D, H, W, C)`` for a batch. Degenerate axes carry extent 1.
    """

    data: Tensor
    components: int

    def __post_init__(self) -> None:
        if self.data.ndim not in (5, 6):
            raise DimensionError(f'field data must be 5D or 6D, got shape {self.data.shape}')
        if self.data.shape[-1] != self.components:
            raise DimensionError(
                f'field declares {self.components} components but data has {self.data.shape[-1]}'
            )

    @classmethod
    def from_images(cls, images: np.ndarray | Tensor) -> 'FieldTensor':
        """
        Wrap static multi-band images.

        Args:
            images: ``(H, W, C)`` or ``(B, H, W, C)``.

        Returns:
            Field with T = D = 1.
        """
        tensor = images if isinstance(images, Tensor) else Tensor(images)
        if tensor.ndim == 3:
            height, width, comps = tensor.shape
            data = np.reshape(tensor.data, (1, 1, height, width, comps))
        elif tensor.ndim == 4:
            batch, height, width, comps = tensor.shape
            data = np.reshape(tensor.data, (batch, 1, 1, height, width, comps))
        else:
            raise DimensionError(f'images must be (H, W, C) or (B, H, W, C), got {tensor.shape}')
        return cls(Tensor(data, requires_grad=tensor.requires_grad), comps)

    @property
    def batched(self) -> bool:
        return self.data.ndim == 6

    @property
    def batch_size(self) -> int:
        return self.data.shape[0] if self.batched else 1

    @property
    def extents(self) -> tuple[int, int, int, int]:
        """Return (T, D, H, W)."""
        t, d, h, w = self.data.shape[-5:-1]
        return t, d, h, w

    def images(self) -> np.ndarray:
        """Return the values as ``(B, H, W, C)`` images (T = D = 1 only)."""
        t, d, h, w = self.extents
        if t != 1 or d != 1:
            raise DimensionError('images() needs T = D = 1')
        return self.data.data.reshape((self.batch_size, h, w, self.components))
