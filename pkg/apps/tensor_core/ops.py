"""
Differentiable operations over ``Tensor``.

Shape rules: operands of elementwise ops must have identical shapes, or
one of them must be a scalar (a Python number or a single-element
tensor). Any other shape mixing goes through ``reshape``, ``transpose`` or
``expand`` explicitly. ``layernorm`` applies its gain and bias vectors
along the normalized axis; that is the only other implicit repetition.
"""
import math
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from apps.core.exceptions import DimensionError, ParameterError
from apps.tensor_core.tensor import Tensor, emit

Operand = Tensor | float | int

LAYERNORM_EPS = 1e-5
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def as_tensor(value: Operand) -> Tensor:
    """Return ``value`` as a constant tensor unless it already is one."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _is_scalar(tensor: Tensor) -> bool:
    return tensor.ndim == 0 or tensor.size == 1 and tensor.ndim <= 1


def _pair(a: Operand, b: Operand, op: str) -> tuple[Tensor, Tensor]:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and not (_is_scalar(a) or _is_scalar(b)):
        raise DimensionError(f'{op}: shapes {a.shape} and {b.shape} differ')
    return a, b


def _reduce_to(grad: np.ndarray, tensor: Tensor) -> np.ndarray:
    """Sum a gradient back onto a scalar operand."""
    if grad.shape == tensor.shape:
        return grad
    return np.full(tensor.shape, grad.sum())


def add(a: Operand, b: Operand) -> Tensor:
    """Elementwise sum."""
    a, b = _pair(a, b, 'add')
    return emit(
        'add',
        a.data + b.data,
        (a, b),
        lambda g: (_reduce_to(g, a), _reduce_to(g, b)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    """Elementwise difference."""
    a, b = _pair(a, b, 'sub')
    return emit(
        'sub',
        a.data - b.data,
        (a, b),
        lambda g: (_reduce_to(g, a), _reduce_to(-g, b)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    """Elementwise product."""
    a, b = _pair(a, b, 'mul')
    return emit(
        'mul',
        a.data * b.data,
        (a, b),
        lambda g: (_reduce_to(g * b.data, a), _reduce_to(g * a.data, b)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the two trailing axes.

    Leading (batch) axes must be identical on both operands.

    Raises:
        DimensionError: On rank or extent mismatch.
    """
    if a.ndim < 2 or b.ndim != a.ndim:
        raise DimensionError(f'matmul: ranks {a.ndim} and {b.ndim} are not compatible')
    if a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f'matmul: batch extents {a.shape[:-2]} and {b.shape[:-2]} differ')
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f'matmul: inner extents {a.shape[-1]} and {b.shape[-2]} differ')

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.matmul(g, np.swapaxes(b.data, -1, -2)),
            np.matmul(np.swapaxes(a.data, -1, -2), g),
        )

    return emit('matmul', np.matmul(a.data, b.data), (a, b), rule)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Reshape without changing the row-major value order."""
    try:
        array = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise DimensionError(f'reshape: cannot view {x.shape} as {tuple(shape)}') from exc
    return emit('reshape', array, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    """Permute axes."""
    axes = tuple(axes)
    if sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
        raise DimensionError(f'transpose: {axes} is not a permutation of {x.ndim} axes')
    inverse = tuple(np.argsort([a % x.ndim for a in axes]))
    return emit(
        'transpose',
        np.transpose(x.data, axes),
        (x,),
        lambda g: (np.transpose(g, inverse),),
    )


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    """
    Repeat ``x`` to ``shape`` explicitly.

    New axes are added on the left and extent-1 axes are repeated.
    """
    shape = tuple(shape)
    if x.ndim > len(shape):
        raise DimensionError(f'expand: cannot expand {x.shape} to {shape}')
    lead = len(shape) - x.ndim
    for have, want in zip(x.shape, shape[lead:]):
        if have not in (1, want):
            raise DimensionError(f'expand: cannot expand {x.shape} to {shape}')
    repeated = tuple(
        i for i, (have, want) in enumerate(zip(x.shape, shape[lead:]), start=lead)
        if have == 1 and want != 1
    )

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        if repeated:
            g = g.sum(axis=repeated, keepdims=True)
        if lead:
            g = g.sum(axis=tuple(range(lead)))
        return (g.reshape(x.shape),)

    return emit('expand', np.broadcast_to(x.data, shape).copy(), (x,), rule)


def reduce_sum(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    """Sum over ``axis`` (all axes when None)."""
    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return emit('sum', np.sum(x.data, axis=axis, keepdims=keepdims), (x,), rule)


def reduce_mean(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    """Mean over ``axis`` (all axes when None)."""
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(reduce_sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    """Concatenate along ``axis``; all other extents must agree."""
    if not tensors:
        raise DimensionError('concat: nothing to concatenate')
    ndim = tensors[0].ndim
    axis = axis % ndim
    for tensor in tensors[1:]:
        if tensor.ndim != ndim or any(
            tensor.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f'concat: {tensor.shape} does not match {tensors[0].shape} off axis {axis}'
            )
    bounds = np.cumsum([0] + [tensor.shape[axis] for tensor in tensors])

    def rule(g: np.ndarray) -> list[np.ndarray]:
        return [
            np.take(g, np.arange(start, stop), axis=axis)
            for start, stop in zip(bounds[:-1], bounds[1:])
        ]

    return emit(
        'concat',
        np.concatenate([tensor.data for tensor in tensors], axis=axis),
        tuple(tensors),
        rule,
    )


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, ``x * Phi(x)`` with the erf-based normal CDF."""
    cdf = ndtr(x.data)
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return emit('gelu', x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``."""
    if not -x.ndim <= axis < max(x.ndim, 1):
        raise DimensionError(f'softmax: axis {axis} out of range for {x.shape}')
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=axis, keepdims=True)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (probs * (g - (g * probs).sum(axis=axis, keepdims=True)),)

    return emit('softmax', probs, (x,), rule)


def _as_tuple(value: int | Sequence[int], dims: int, name: str) -> tuple[int, ...]:
    values = (value,) * dims if isinstance(value, int) else tuple(value)
    if len(values) != dims:
        raise ParameterError(f'conv: {name} needs {dims} entries, got {values}')
    return values


def conv(
    x: Tensor,
    kernel: Tensor,
    dims: int,
    stride: int | Sequence[int] = 1,
    padding: int | Sequence[int] = 0,
) -> Tensor:
    """
    Cross-correlation over the trailing ``dims`` spatial axes.

    Layouts: ``x`` is ``(*batch, C_in, *spatial)`` and ``kernel`` is
    ``(C_out, C_in, *k)``. Leading batch axes are independent. Output
    extents are ``(n + 2p - k) // s + 1``.

    Raises:
        DimensionError: On channel mismatch or a kernel larger than the
            padded input.
    """
    if dims not in (1, 2):
        raise ParameterError(f'conv: dims must be 1 or 2, got {dims}')
    stride = _as_tuple(stride, dims, 'stride')
    padding = _as_tuple(padding, dims, 'padding')
    if any(s < 1 for s in stride) or any(p < 0 for p in padding):
        raise ParameterError(f'conv: invalid stride {stride} or padding {padding}')
    if kernel.ndim != dims + 2 or x.ndim < dims + 1:
        raise DimensionError(f'conv: ranks {x.shape} and {kernel.shape} do not fit {dims}D')

    c_out, c_in = kernel.shape[:2]
    ksize = kernel.shape[2:]
    if x.shape[-dims - 1] != c_in:
        raise DimensionError(f'conv: input has {x.shape[-dims - 1]} channels, kernel expects {c_in}')

    batch_shape = x.shape[:-dims - 1]
    spatial = x.shape[-dims:]
    padded = tuple(n + 2 * p for n, p in zip(spatial, padding))
    if any(k > n for k, n in zip(ksize, padded)):
        raise DimensionError(f'conv: kernel {ksize} larger than padded input {padded}')
    out_sizes = tuple((n - k) // s + 1 for n, k, s in zip(padded, ksize, stride))

    xb = x.data.reshape((-1, c_in) + spatial)
    xp = np.pad(xb, [(0, 0), (0, 0)] + [(p, p) for p in padding])
    lead = (slice(None), slice(None))

    def window(offset: tuple[int, ...]) -> tuple[slice, ...]:
        return lead + tuple(
            slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(offset, stride, out_sizes)
        )

    out = np.zeros((xb.shape[0], c_out) + out_sizes)
    for offset in np.ndindex(*ksize):
        out += np.einsum('bc...,oc->bo...', xp[window(offset)], kernel.data[lead + offset])

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gb = g.reshape((-1, c_out) + out_sizes)
        gxp = np.zeros_like(xp)
        gk = np.zeros(kernel.shape)
        for offset in np.ndindex(*ksize):
            sl = window(offset)
            gk[lead + offset] = np.einsum(
                'bon,bcn->oc', gb.reshape(gb.shape[:2] + (-1,)), xp[sl].reshape(xp.shape[:2] + (-1,))
            )
            gxp[sl] += np.einsum('bo...,oc->bc...', gb, kernel.data[lead + offset])
        inner = lead + tuple(slice(p, p + n) for p, n in zip(padding, spatial))
        return gxp[inner].reshape(x.shape), gk

    return emit('conv', out.reshape(batch_shape + (c_out,) + out_sizes), (x, kernel), rule)


def layernorm(x: Tensor, axis: int, gain: Tensor, bias: Tensor) -> Tensor:
    """
    Normalize each slice along ``axis`` to zero mean and unit variance.

    Uses the population variance with epsilon 1e-5, then applies ``gain``
    and ``bias`` (vectors of extent ``x.shape[axis]``).
    """
    axis = axis % x.ndim
    extent = x.shape[axis]
    if gain.shape != (extent,) or bias.shape != (extent,):
        raise DimensionError(
            f'layernorm: gain {gain.shape} and bias {bias.shape} must be ({extent},)'
        )
    view = [1] * x.ndim
    view[axis] = extent
    g_view = gain.data.reshape(view)
    b_view = bias.data.reshape(view)

    mean = x.data.mean(axis=axis, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=axis, keepdims=True) + LAYERNORM_EPS)
    xhat = centered * inv_std
    others = tuple(i for i in range(x.ndim) if i != axis)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dxhat = g * g_view
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=axis, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=others), g.sum(axis=others)

    return emit('layernorm', xhat * g_view + b_view, (x, gain, bias), rule)


def dropout(
    x: Tensor,
    rate: float,
    training: bool,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """
    Inverted dropout.

    In eval mode, or with rate 0, ``x`` is returned unchanged. In train
    mode kept entries are scaled by ``1 / (1 - rate)``.

    Raises:
        ParameterError: If ``rate`` is outside [0, 1) or no generator is
            given in train mode.
    """
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f'dropout rate must be in [0, 1), got {rate}')
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ParameterError('dropout in train mode needs a random generator')
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return emit('dropout', x.data * mask, (x,), lambda g: (g * mask,))


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared elementwise differences."""
    if pred.shape != target.shape:
        raise DimensionError(f'mse: shapes {pred.shape} and {target.shape} differ')
    diff = pred.data - target.data
    scale = 2.0 / diff.size

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad = g * scale * diff
        return grad, -grad

    return emit('mse', np.mean(diff * diff), (pred, target), rule)
