"""
Central finite-difference checks for the tape gradients.
"""
from typing import Callable, Sequence

import numpy as np

from apps.tensor_core.nn import Parameter
from apps.tensor_core.tensor import Tape, Tensor, backward

DEFAULT_STEP = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Return ``|a - n| / max(|a|, |n|)`` in the 2-norm, 0 when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_function(
    fn: Callable[..., Tensor],
    arrays: Sequence[np.ndarray],
    step: float = DEFAULT_STEP,
) -> list[float]:
    """
    Compare tape gradients of ``fn`` with central differences.

    Args:
        fn: Maps input tensors to a scalar tensor.
        arrays: Input values; each becomes a tensor with ``requires_grad``.
        step: Finite-difference step.

    Returns:
        Relative error per input.
    """
    inputs = [Tensor(array, requires_grad=True) for array in arrays]
    with Tape() as tape:
        loss = fn(*inputs)
    backward(loss, tape)

    errors = []
    for index, array in enumerate(arrays):
        base = np.array(array, dtype=np.float64)
        numeric = np.zeros_like(base)
        for position in np.ndindex(base.shape):
            values = []
            for sign in (1.0, -1.0):
                shifted = base.copy()
                shifted[position] += sign * step
                args = [
                    Tensor(shifted) if i == index else Tensor(other)
                    for i, other in enumerate(arrays)
                ]
                values.append(fn(*args).item())
            numeric[position] = (values[0] - values[1]) / (2.0 * step)
        analytic = inputs[index].grad
        if analytic is None:
            analytic = np.zeros_like(base)
        errors.append(relative_error(analytic, numeric))
    return errors


def check_parameters(
    loss_fn: Callable[[], Tensor],
    parameters: dict[str, Parameter],
    rng: np.random.Generator,
    entries_per_parameter: int = 3,
    step: float = DEFAULT_STEP,
) -> dict[str, float]:
    """
    Spot-check parameter gradients of a model loss.

    A random subset of entries of every parameter is perturbed in place
    and restored afterwards.

    Args:
        loss_fn: Runs the forward pass and returns a scalar loss.
        parameters: Dotted name to parameter.
        rng: Picks the entries to probe.
        entries_per_parameter: Entries probed per parameter.
        step: Finite-difference step.

    Returns:
        Relative error per parameter name over the probed entries.
    """
    for param in parameters.values():
        param.grad = None
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)

    errors = {}
    for name, param in parameters.items():
        original = param.numpy()
        count = min(entries_per_parameter, original.size)
        flat_positions = rng.choice(original.size, size=count, replace=False)
        analytic = np.zeros(count)
        numeric = np.zeros(count)
        grad = param.grad if param.grad is not None else np.zeros_like(original)
        for slot, flat in enumerate(flat_positions):
            position = np.unravel_index(flat, original.shape)
            analytic[slot] = grad[position]
            values = []
            for sign in (1.0, -1.0):
                shifted = original.copy()
                shifted[position] += sign * step
                param.assign(shifted)
                values.append(loss_fn().item())
            numeric[slot] = (values[0] - values[1]) / (2.0 * step)
        param.assign(original)
        errors[name] = relative_error(analytic, numeric)
    return errors
