"""
Dense tensor value type and reverse-mode recording tape.

A ``Tensor`` wraps a read-only float64 numpy array. Operations executed
while a ``Tape`` is active, and whose inputs require gradients, are
recorded on that tape; ``backward`` replays the records in reverse
order. Tapes are kept on a thread-local stack, so independent tapes may
run in separate threads.

Tape policy: ``backward`` clears the tape after the pass unless
``retain=True`` is passed.
"""
import threading
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from apps.core.exceptions import DimensionError, NumericalError, ParameterError

BackwardRule = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_local = threading.local()


class Tensor:
    """
    Immutable dense array with an optional gradient buffer.

    Attributes:
        data: Read-only float64 array in row-major order.
        requires_grad: Whether ``backward`` populates ``grad`` for this tensor.
        grad: Gradient buffer with the same shape as ``data`` or None.
    """

    __slots__ = ('data', 'requires_grad', 'grad', 'name')

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        array = np.array(data, dtype=np.float64)
        _check_array(array, 'tensor')
        array.flags.writeable = False
        self.data = array
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray, requires_grad: bool, op: str) -> 'Tensor':
        """Wrap an op result without copying."""
        array = np.asarray(array, dtype=np.float64)
        _check_array(array, op)
        array.flags.writeable = False
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.name = None
        return tensor

    @property
    def shape(self) -> tuple[int, ...]:
        """Return the tensor extents."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        """Return the number of axes."""
        return self.data.ndim

    @property
    def size(self) -> int:
        """Return the number of scalar values."""
        return int(self.data.size)

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self.size != 1:
            raise DimensionError(f'item() needs one element, got shape {self.shape}')
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the values."""
        return self.data.copy()

    def zero_grad(self) -> None:
        """Drop the accumulated gradient."""
        self.grad = None

    def __repr__(self) -> str:
        """Return a short representation."""
        label = f' {self.name}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})'


def _check_array(array: np.ndarray, where: str) -> None:
    """Enforce positive extents and finite values."""
    if any(extent < 1 for extent in array.shape):
        raise DimensionError(f'{where}: extents must be positive, got {array.shape}')
    if not np.isfinite(array).all():
        raise NumericalError(f'{where} produced non-finite values')


@dataclass
class Node:
    """One recorded operation."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    rule: BackwardRule


class Tape:
    """
    Ordered record of differentiable operations.

    Nodes are appended as operations execute, so every node's inputs
    precede it. Use as a context manager to make it the active tape of the
    current thread.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []

    def __enter__(self) -> 'Tape':
        _stack().append(self)
        return self

    def __exit__(self, *exc_info: Any) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        output: Tensor,
        rule: BackwardRule,
    ) -> None:
        """Append a node."""
        self.nodes.append(Node(op=op, inputs=tuple(inputs), output=output, rule=rule))

    def clear(self) -> None:
        """Forget all recorded nodes."""
        self.nodes.clear()

    def produced(self, tensor: Tensor) -> bool:
        """Return whether ``tensor`` is the output of a recorded node."""
        return any(node.output is tensor for node in self.nodes)


def _stack() -> list[Tape]:
    if not hasattr(_local, 'tapes'):
        _local.tapes = []
    return _local.tapes


def active_tape() -> Tape | None:
    """Return the innermost active tape of this thread, if any."""
    stack = _stack()
    return stack[-1] if stack else None


def emit(
    op: str,
    array: np.ndarray,
    inputs: Sequence[Tensor],
    rule: BackwardRule,
) -> Tensor:
    """
    Wrap an op result and record it on the active tape when needed.

    Args:
        op: Operation name used in diagnostics.
        array: Forward result.
        inputs: Operand tensors in the order ``rule`` returns gradients.
        rule: Maps the output gradient to one gradient per input.

    Returns:
        The output tensor.
    """
    requires_grad = any(tensor.requires_grad for tensor in inputs)
    out = Tensor._wrap(array, requires_grad, op)
    tape = active_tape()
    if tape is not None and requires_grad:
        tape.record(op, inputs, out, rule)
    return out


def backward(loss: Tensor, tape: Tape, retain: bool = False) -> None:
    """
    Populate gradients of ``loss`` for every tensor with ``requires_grad``.

    Gradients accumulate by summation into existing ``grad`` buffers; call
    ``zero_grad`` before each optimization step.

    Args:
        loss: Single-element tensor recorded on ``tape``.
        tape: Tape holding the forward computation.
        retain: Keep the nodes for another pass instead of clearing.

    Raises:
        DimensionError: If the loss is not a scalar.
        ParameterError: If the loss was not recorded on the tape.
    """
    if loss.size != 1:
        raise DimensionError(f'backward needs a scalar loss, got shape {loss.shape}')
    if not tape.produced(loss):
        raise ParameterError('loss was not recorded on this tape')

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    holders: dict[int, Tensor] = {id(loss): loss}

    for node in reversed(tape.nodes):
        out_grad = grads.get(id(node.output))
        if out_grad is None:
            continue
        input_grads = node.rule(out_grad)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                raise DimensionError(
                    f'{node.op}: gradient shape {grad.shape} does not match {tensor.shape}'
                )
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
                holders[key] = tensor

    for key, grad in grads.items():
        tensor = holders[key]
        if not np.isfinite(grad).all():
            raise NumericalError('backward produced non-finite gradients')
        tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad

    if not retain:
        tape.clear()


def zero_grad(tensors: Iterable[Tensor]) -> None:
    """Reset the gradient buffers of ``tensors``."""
    for tensor in tensors:
        tensor.grad = None
