"""
Trainable building blocks on top of the tensor ops.

``Module`` discovers its parameters and sub-modules from instance
attributes in definition order, which gives stable dotted parameter
names for checkpoints and optimizer groups.
"""
from typing import Any, Iterator

import numpy as np

from apps.core.exceptions import DataFormatError, DimensionError
from apps.tensor_core import ops
from apps.tensor_core.tensor import Tensor

INIT_STD = 0.02


class Parameter(Tensor):
    """Trainable tensor; the optimizer swaps its values through ``assign``."""

    __slots__ = ()

    def __init__(self, data: Any, name: str | None = None) -> None:
        super().__init__(data, requires_grad=True, name=name)

    def assign(self, values: np.ndarray) -> None:
        """
        Replace the values in place of the old buffer.

        Raises:
            DimensionError: If the shape changes.
        """
        values = np.array(values, dtype=np.float64)
        if values.shape != self.shape:
            raise DimensionError(f'assign: shape {values.shape} does not match {self.shape}')
        values.flags.writeable = False
        self.data = values


def trunc_normal(rng: np.random.Generator, shape: tuple[int, ...], std: float = INIT_STD) -> np.ndarray:
    """Draw from a normal truncated at two standard deviations."""
    values = rng.standard_normal(shape)
    outside = np.abs(values) > 2.0
    while outside.any():
        values[outside] = rng.standard_normal(int(outside.sum()))
        outside = np.abs(values) > 2.0
    return values * std


class Module:
    """Base class for layers with parameters."""

    training: bool = True

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Parameter]]:
        """Yield ``(dotted_name, parameter)`` pairs in definition order."""
        for name, value in vars(self).items():
            full = f'{prefix}{name}'
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f'{full}.')
            elif isinstance(value, list):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f'{full}.{index}.')

    def parameters(self) -> list[Parameter]:
        """Return all parameters."""
        return [param for _, param in self.named_parameters()]

    def modules(self) -> Iterator['Module']:
        """Yield this module and all sub-modules."""
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True) -> 'Module':
        """Switch dropout behaviour for this module tree."""
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> 'Module':
        """Switch to evaluation mode."""
        return self.train(False)

    def zero_grad(self) -> None:
        """Reset gradients of all parameters."""
        for param in self.parameters():
            param.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        """Return copies of all parameter values keyed by dotted name."""
        return {name: param.numpy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """
        Copy values into the parameters.

        Raises:
            DataFormatError: On missing, unexpected or mis-shaped entries.
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise DataFormatError(
                'parameter names do not match',
                missing=missing,
                unexpected=unexpected,
            )
        for name, param in own.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise DataFormatError(
                    f'parameter {name} has shape {values.shape}, expected {param.shape}'
                )
            param.assign(values)

    def num_parameters(self) -> int:
        """Return the total number of scalar parameters."""
        return sum(param.size for param in self.parameters())


class Linear(Module):
    """Affine map over the trailing axis."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        zero_init: bool = False,
    ) -> None:
        self.in_features = in_features
        self.out_features = out_features
        weight = np.zeros((in_features, out_features)) if zero_init else trunc_normal(
            rng, (in_features, out_features)
        )
        self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(out_features))

    def forward(self, x: Tensor) -> Tensor:
        """Apply ``x @ W + b`` to every trailing-axis vector of ``x``."""
        if x.shape[-1] != self.in_features:
            raise DimensionError(
                f'linear: expected {self.in_features} input features, got {x.shape[-1]}'
            )
        lead = x.shape[:-1]
        flat = ops.reshape(x, (-1, self.in_features))
        out = ops.matmul(flat, self.weight)
        out = ops.add(out, ops.expand(self.bias, out.shape))
        return ops.reshape(out, lead + (self.out_features,))


class LayerNorm(Module):
    """Layer normalization over the trailing axis."""

    def __init__(self, features: int) -> None:
        self.gain = Parameter(np.ones(features))
        self.bias = Parameter(np.zeros(features))

    def forward(self, x: Tensor) -> Tensor:
        return ops.layernorm(x, -1, self.gain, self.bias)
