"""
AdamW with decoupled weight decay.
"""
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from apps.core.exceptions import DimensionError, NumericalError
from apps.tensor_core.nn import Parameter

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class OptimizerState:
    """First/second moment buffers keyed like the parameters, plus the step count."""

    base_lr: float
    weight_decay: float = 0.01
    step: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray | None],
    state: OptimizerState,
    lr: float,
) -> dict[str, np.ndarray]:
    """
    One bias-corrected Adam update with ``theta <- theta - lr * wd * theta``.

    Missing gradients count as zero. ``state`` is updated in place.

    Returns:
        The new parameter values.

    Raises:
        DimensionError: If a gradient or moment buffer does not match its parameter.
    """
    state.step += 1
    t = state.step
    updated = {}
    for name, theta in params.items():
        grad = grads.get(name)
        grad = np.zeros_like(theta) if grad is None else grad
        if grad.shape != theta.shape:
            raise DimensionError(f'{name}: gradient shape {grad.shape} does not match {theta.shape}')
        m = state.first.get(name, np.zeros_like(theta))
        v = state.second.get(name, np.zeros_like(theta))
        if m.shape != theta.shape or v.shape != theta.shape:
            raise DimensionError(f'{name}: optimizer moments do not match shape {theta.shape}')
        m = BETA1 * m + (1.0 - BETA1) * grad
        v = BETA2 * v + (1.0 - BETA2) * grad * grad
        m_hat = m / (1.0 - BETA1 ** t)
        v_hat = v / (1.0 - BETA2 ** t)
        state.first[name] = m
        state.second[name] = v
        updated[name] = theta - lr * state.weight_decay * theta - lr * m_hat / (np.sqrt(v_hat) + EPS)
    return updated


class AdamW:
    """
    Optimizer over one named parameter group.

    A learning rate of 0 leaves the group untouched, moments included.
    """

    def __init__(
        self,
        named_parameters: Sequence[tuple[str, Parameter]],
        lr: float,
        weight_decay: float = 0.01,
    ) -> None:
        self.parameters = dict(named_parameters)
        self.state = OptimizerState(base_lr=lr, weight_decay=weight_decay)

    def step(self, lr: float) -> None:
        """Apply one update with ``lr``."""
        if lr == 0:
            return
        values = {name: param.data for name, param in self.parameters.items()}
        grads = {name: param.grad for name, param in self.parameters.items()}
        updated = adamw_step(values, grads, self.state, lr)
        for name, theta in updated.items():
            if not np.isfinite(theta).all():
                raise NumericalError(f'AdamW produced non-finite values for {name}')
            self.parameters[name].assign(theta)

    def zero_grad(self) -> None:
        for param in self.parameters.values():
            param.grad = None

    def ids(self) -> set[int]:
        """Identity set of the managed parameters."""
        return {id(param) for param in self.parameters.values()}
