"""
Backbone plus task-specific head, with the normalization statistics the
head's inputs and targets need.
"""
from dataclasses import dataclass

import numpy as np

from apps.backbone.config import BackboneConfig
from apps.backbone.fields import FieldTensor
from apps.backbone.model import Backbone
from apps.core.exceptions import DataFormatError, DimensionError
from apps.datasets.container import Dataset
from apps.tensor_core.tensor import Tensor
from apps.tsh.config import TSHConfig
from apps.tsh.head import TaskSpecificHead

CONSTANT_STD = 1e-12


@dataclass
class Normalization:
    """Train-split statistics of the scalar inputs and the predicted targets."""

    scalar_mean: np.ndarray
    scalar_scale: np.ndarray
    target_mean: np.ndarray
    target_scale: np.ndarray

    @staticmethod
    def _stats(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        return mean, np.where(std < CONSTANT_STD, 1.0, std)

    @classmethod
    def fit(cls, dataset: Dataset, target_indices: tuple[int, ...]) -> 'Normalization':
        scalar_mean, scalar_scale = cls._stats(dataset.scalars)
        target_mean, target_scale = cls._stats(dataset.params[:, list(target_indices)])
        return cls(scalar_mean, scalar_scale, target_mean, target_scale)

    @classmethod
    def identity(cls, n_scalars: int, n_targets: int) -> 'Normalization':
        return cls(np.zeros(n_scalars), np.ones(n_scalars), np.zeros(n_targets), np.ones(n_targets))

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            'scalar_mean': self.scalar_mean,
            'scalar_scale': self.scalar_scale,
            'target_mean': self.target_mean,
            'target_scale': self.target_scale,
        }


class ModelBundle:
    """
    The trainable model: ``backbone`` and ``head`` parameter groups.

    Both groups are built from one generator seeded with ``seed``, so a
    scratch bundle and a finetune bundle with the same seed share the head
    initialization and differ only in the backbone weights.
    """

    def __init__(self, backbone_cfg: BackboneConfig, tsh_cfg: TSHConfig, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        self.backbone_cfg = backbone_cfg.validate()
        self.tsh_cfg = tsh_cfg.validate()
        self.seed = seed
        self.backbone = Backbone(backbone_cfg, rng)
        self.head = TaskSpecificHead(tsh_cfg, backbone_cfg.embed_dim, rng)
        self.normalization = Normalization.identity(15, tsh_cfg.n_params_out)

    @property
    def target_indices(self) -> tuple[int, ...]:
        return self.tsh_cfg.target_indices

    def parameter_groups(self) -> dict[str, list]:
        """Named parameters per optimizer group."""
        return {
            'backbone': list(self.backbone.named_parameters()),
            'tsh': list(self.head.named_parameters()),
        }

    def train(self) -> None:
        self.backbone.train()
        self.head.train()

    def eval(self) -> None:
        self.backbone.eval()
        self.head.eval()

    def zero_grad(self) -> None:
        self.backbone.zero_grad()
        self.head.zero_grad()

    def fit_normalization(self, train: Dataset) -> None:
        self.normalization = Normalization.fit(train, self.target_indices)

    def inputs(self, dataset: Dataset, indices: np.ndarray) -> tuple[FieldTensor, Tensor, Tensor]:
        """Return ``(field, standardized scalars, standardized targets)`` for ``indices``."""
        norm = self.normalization
        field = FieldTensor.from_images(dataset.images[indices])
        if field.extents != self.backbone_cfg.field_extents:
            raise DimensionError(
                f'dataset field {field.extents} does not match backbone {self.backbone_cfg.field_extents}'
            )
        scalars = (dataset.scalars[indices] - norm.scalar_mean) / norm.scalar_scale
        targets = dataset.params[indices][:, list(self.target_indices)]
        targets = (targets - norm.target_mean) / norm.target_scale
        return field, Tensor(scalars), Tensor(targets)

    def forward(
        self,
        field: FieldTensor,
        scalars: Tensor,
        rng: np.random.Generator | None = None,
    ) -> tuple[FieldTensor, Tensor]:
        """Return ``(reconstruction, standardized parameter estimates)``."""
        latents, reconstruction = self.backbone(field, rng)
        return reconstruction, self.head(latents, scalars, rng)

    def destandardize(self, predictions: np.ndarray) -> np.ndarray:
        norm = self.normalization
        return predictions * norm.target_scale + norm.target_mean

    def state_dict(self) -> dict[str, np.ndarray]:
        """Flat arrays keyed ``backbone.*``, ``tsh.*`` and ``norm.*``."""
        state = {f'backbone.{k}': v for k, v in self.backbone.state_dict().items()}
        state.update({f'tsh.{k}': v for k, v in self.head.state_dict().items()})
        state.update({f'norm.{k}': v for k, v in self.normalization.arrays().items()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """
        Restore everything ``state_dict`` returns.

        Raises:
            DataFormatError: On missing, unexpected or mis-shaped entries.
        """
        self.backbone.load_state_dict(_section(state, 'backbone.'))
        self.head.load_state_dict(_section(state, 'tsh.'))
        norm = _section(state, 'norm.')
        expected = set(Normalization.identity(0, 0).arrays())
        if set(norm) != expected:
            raise DataFormatError(f'normalization entries {sorted(norm)} do not match {sorted(expected)}')
        self.normalization = Normalization(**{k: np.array(v, dtype=np.float64) for k, v in norm.items()})


def _section(state: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    return {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
