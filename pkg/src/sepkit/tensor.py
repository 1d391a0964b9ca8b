"""Dense-tensor numeric core with reverse-mode automatic differentiation.

Values are numpy arrays wrapped in :class:`DiffTensor`. Operations executed
while a :class:`Tape` is active are recorded in creation order; since the
graph is built eagerly, creation order is a valid topological order and
``backward`` is a single reverse sweep that visits each node exactly once.

Typical use::

    with Tape():
        y = matmul(x, w) + b
        loss = frobenius_norm(y - target)
    loss.backward()
    # w.grad / b.grad now populated

Design constraints honoured here:
  * broadcasting is limited to leading batch dimensions, trailing
    per-feature vectors (bias add) and scalars; the unbroadcast rule is
    a plain sum over the expanded axes,
  * repeated ``backward`` calls accumulate additively into ``.grad``,
  * tensors produced outside any tape (or under ``no_grad``) do not
    track gradients.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError, GraphError
from . import kernels

DEFAULT_DTYPE = np.float64

__all__ = [
    "DiffTensor",
    "Tape",
    "no_grad",
    "astensor",
    "parameter",
    "custom_op",
    "elementwise",
    "add",
    "sub",
    "mul",
    "sigmoid",
    "swish",
    "relu",
    "log",
    "exp",
    "clamp_min",
    "matmul",
    "layer_norm",
    "standardize",
    "depthwise_conv1d",
    "softmax_lastaxis",
    "log_softmax_lastaxis",
    "reduce_sum",
    "reduce_mean",
    "reshape",
    "transpose",
    "slice_axis",
    "take_rows",
    "frobenius_norm",
]


class _Node:
    __slots__ = ("out", "inputs", "backward_fn")

    def __init__(self, out, inputs, backward_fn):
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of primitive operations, usable as a context manager."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self.nodes)


_TAPE_STACK: list[Tape] = []
_NO_GRAD_DEPTH = 0


class no_grad:
    """Context manager that suppresses recording (teacher / inference passes)."""

    def __enter__(self):
        global _NO_GRAD_DEPTH
        _NO_GRAD_DEPTH += 1
        return self

    def __exit__(self, exc_type, exc, tb):
        global _NO_GRAD_DEPTH
        _NO_GRAD_DEPTH -= 1
        return False


def _active_tape() -> Optional[Tape]:
    if _NO_GRAD_DEPTH or not _TAPE_STACK:
        return None
    return _TAPE_STACK[-1]


class DiffTensor:
    """A dense n-dimensional value participating in gradient taping."""

    __slots__ = ("data", "requires_grad", "grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._tape: Optional[Tape] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def sum(self):
        return reduce_sum(self)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"DiffTensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def astensor(x, dtype=None) -> DiffTensor:
    """Wrap ``x`` as a constant DiffTensor (no-op when already one)."""
    if isinstance(x, DiffTensor):
        return x
    arr = np.asarray(x, dtype=dtype if dtype is not None else None)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(DEFAULT_DTYPE)
    return DiffTensor(arr)


def parameter(data, dtype=None) -> DiffTensor:
    """Create a trainable leaf tensor."""
    arr = np.array(data, dtype=dtype if dtype is not None else None)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(DEFAULT_DTYPE)
    return DiffTensor(arr, requires_grad=True)


def custom_op(out_data: np.ndarray, inputs: Sequence[DiffTensor],
              backward_fn: Callable) -> DiffTensor:
    """Register a fused primitive.

    ``backward_fn(out_grad)`` must return one gradient array (or None) per
    input, matching the input shapes. Recording only happens when a tape is
    active and some input requires a gradient.
    """
    out = DiffTensor(out_data)
    tape = _active_tape()
    if tape is not None and any(i.requires_grad for i in inputs):
        out.requires_grad = True
        out._tape = tape
        tape.nodes.append(_Node(out, tuple(inputs), backward_fn))
    return out


def backward(root: DiffTensor):
    """Populate gradients of every tensor reachable from a scalar root.

    Gradients accumulate additively across repeated calls; callers reset
    leaves via ``zero_grad`` between optimization steps.
    """
    if root.data.size != 1:
        raise DimensionError(
            f"backward requires a scalar root, got shape {root.data.shape}")
    tape = root._tape
    if tape is None:
        if root.requires_grad:
            _accumulate_grad(root, np.ones_like(root.data))
            return
        raise GraphError("backward on a tensor that was not recorded on a tape")

    pending: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    holders: dict[int, DiffTensor] = {id(root): root}
    for node in reversed(tape.nodes):
        g = pending.pop(id(node.out), None)
        if g is None:
            continue
        holders.pop(id(node.out), None)
        if node.out.requires_grad:
            _accumulate_grad(node.out, g)
        input_grads = node.backward_fn(g)
        for inp, ig in zip(node.inputs, input_grads):
            if ig is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in pending:
                pending[key] = pending[key] + ig
            else:
                pending[key] = ig
                holders[key] = inp
    # whatever is left belongs to leaves (or tensors recorded on other tapes)
    for key, g in pending.items():
        t = holders[key]
        if t.requires_grad:
            _accumulate_grad(t, g)


def _accumulate_grad(t: DiffTensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad = t.grad + g


def _sum_to_shape(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise operations
# ---------------------------------------------------------------------------

def add(a, b) -> DiffTensor:
    a, b = astensor(a), astensor(b)
    try:
        out_data = a.data + b.data
    except ValueError:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    return custom_op(out_data, (a, b), lambda g: (
        _sum_to_shape(g, a.data.shape), _sum_to_shape(g, b.data.shape)))


def sub(a, b) -> DiffTensor:
    a, b = astensor(a), astensor(b)
    try:
        out_data = a.data - b.data
    except ValueError:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")
    return custom_op(out_data, (a, b), lambda g: (
        _sum_to_shape(g, a.data.shape), _sum_to_shape(-g, b.data.shape)))


def mul(a, b) -> DiffTensor:
    a, b = astensor(a), astensor(b)
    try:
        out_data = a.data * b.data
    except ValueError:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    ad, bd = a.data, b.data
    return custom_op(out_data, (a, b), lambda g: (
        _sum_to_shape(g * bd, ad.shape), _sum_to_shape(g * ad, bd.shape)))


def sigmoid(x) -> DiffTensor:
    x = astensor(x)
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    return custom_op(y, (x,), lambda g: (g * y * (1.0 - y),))


def swish(x) -> DiffTensor:
    x = astensor(x)
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    y = d * s
    return custom_op(y, (x,), lambda g: (g * (s + d * s * (1.0 - s)),))


def relu(x) -> DiffTensor:
    x = astensor(x)
    mask = x.data > 0
    return custom_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def log(x) -> DiffTensor:
    x = astensor(x)
    if np.any(x.data <= 0):
        raise DomainError("log of a non-positive value; clamp inputs first "
                          "(see clamp_min with a documented epsilon)")
    d = x.data
    return custom_op(np.log(d), (x,), lambda g: (g / d,))


def exp(x) -> DiffTensor:
    x = astensor(x)
    y = np.exp(x.data)
    return custom_op(y, (x,), lambda g: (g * y,))


def clamp_min(x, floor: float) -> DiffTensor:
    """max(x, floor) elementwise; gradient is zero on the clamped region."""
    x = astensor(x)
    mask = x.data > floor
    return custom_op(np.where(mask, x.data, floor), (x,), lambda g: (g * mask,))


_ELEMENTWISE_BINARY = {"add": add, "mul": mul, "sub": sub}
_ELEMENTWISE_UNARY = {"sigmoid": sigmoid, "swish": swish, "relu": relu,
                      "log": log, "exp": exp}


def elementwise(kind: str, x, y=None) -> DiffTensor:
    """Dispatch by op-kind: {add, mul, sub} binary, {sigmoid, swish, relu, log, exp} unary."""
    if kind in _ELEMENTWISE_BINARY:
        if y is None:
            raise ConfigurationError(f"elementwise '{kind}' needs two operands")
        return _ELEMENTWISE_BINARY[kind](x, y)
    if kind in _ELEMENTWISE_UNARY:
        if y is not None:
            raise ConfigurationError(f"elementwise '{kind}' takes one operand")
        return _ELEMENTWISE_UNARY[kind](x)
    raise ConfigurationError(f"unknown elementwise kind '{kind}'")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b) -> DiffTensor:
    """Matrix product with optional broadcastable leading batch dimensions."""
    a, b = astensor(a), astensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(
            f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}")
    try:
        out_data = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(
            f"matmul: batch dimensions do not broadcast for {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def backward_fn(g):
        ga = _sum_to_shape(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
        gb = _sum_to_shape(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
        return ga, gb

    return custom_op(out_data, (a, b), backward_fn)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> DiffTensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = astensor(x), astensor(gain), astensor(bias)
    n = x.shape[-1] if x.ndim else 0
    if n == 0:
        raise DimensionError("layer_norm over a zero-length last axis")
    if gain.shape != (n,) or bias.shape != (n,):
        raise DimensionError(
            f"layer_norm: gain/bias must be ({n},), got {gain.shape} and {bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward_fn(g):
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (dxhat - m1 - xhat * m2)
        lead = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=lead)
        gbias = g.sum(axis=lead)
        return gx, ggain, gbias

    return custom_op(out, (x, gain, bias), backward_fn)


def standardize(x, axis: int, eps: float = 1e-8) -> DiffTensor:
    """Mean-variance normalization along ``axis`` with the deviation floored at eps.

    Used for utterance-wise feature normalization. Slices whose deviation
    falls at or below the floor (silence, clamped logs) normalize to exactly
    zero and pass no gradient, instead of amplifying rounding noise by 1/eps.
    """
    x = astensor(x)
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    sigma = np.sqrt((xc * xc).mean(axis=axis, keepdims=True))
    active = sigma > eps
    s = np.where(active, sigma, 1.0)
    out = np.where(active, xc / s, 0.0)

    def backward_fn(g):
        m1 = g.mean(axis=axis, keepdims=True)
        m2 = (g * out).mean(axis=axis, keepdims=True)
        return (np.where(active, (g - m1 - out * m2) / s, 0.0),)

    return custom_op(out, (x,), backward_fn)


def depthwise_conv1d(x, kernel, kernel_size: int) -> DiffTensor:
    """Per-channel 1-d convolution along time with same-length zero padding.

    ``x`` is (T, C), ``kernel`` is (C, K) with odd K == kernel_size.
    """
    x, kernel = astensor(x), astensor(kernel)
    if kernel_size % 2 == 0:
        raise ConfigurationError(f"depthwise_conv1d needs an odd kernel size, got {kernel_size}")
    if x.ndim != 2 or kernel.ndim != 2:
        raise DimensionError(
            f"depthwise_conv1d expects (T, C) and (C, K), got {x.shape} and {kernel.shape}")
    if kernel.shape != (x.shape[1], kernel_size):
        raise DimensionError(
            f"depthwise_conv1d: kernel shape {kernel.shape} does not match "
            f"channels {x.shape[1]} / kernel_size {kernel_size}")
    xd, kd = x.data, kernel.data
    out = kernels.depthwise_conv1d_forward(xd, kd)

    def backward_fn(g):
        return kernels.depthwise_conv1d_backward(xd, kd, np.ascontiguousarray(g))

    return custom_op(out, (x, kernel), backward_fn)


def softmax_lastaxis(x) -> DiffTensor:
    """Row-stochastic softmax over the last axis (max-subtracted)."""
    x = astensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    return custom_op(y, (x,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


def log_softmax_lastaxis(x) -> DiffTensor:
    x = astensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    sm = np.exp(out)
    return custom_op(out, (x,), lambda g: (g - sm * g.sum(axis=-1, keepdims=True),))


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------

def reduce_sum(x, axis=None, keepdims: bool = False) -> DiffTensor:
    x = astensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)
    shape = x.data.shape

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, shape).copy(),)

    return custom_op(out, (x,), backward_fn)


def reduce_mean(x, axis=None, keepdims: bool = False) -> DiffTensor:
    x = astensor(x)
    count = x.data.size if axis is None else x.data.shape[axis]
    out = x.data.mean(axis=axis, keepdims=keepdims)
    shape = x.data.shape

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g / count, shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, shape).copy(),)

    return custom_op(out, (x,), backward_fn)


def reshape(x, shape) -> DiffTensor:
    x = astensor(x)
    old = x.data.shape
    return custom_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x, axes) -> DiffTensor:
    x = astensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return custom_op(np.ascontiguousarray(x.data.transpose(axes)), (x,),
                     lambda g: (g.transpose(inv),))


def slice_axis(x, axis: int, start: int, stop: int) -> DiffTensor:
    x = astensor(x)
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    shape = x.data.shape

    def backward_fn(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[idx] = g
        return (full,)

    return custom_op(np.ascontiguousarray(x.data[idx]), (x,), backward_fn)


def take_rows(table, indices) -> DiffTensor:
    """Gather rows of a 2-d table by an integer index array of any shape."""
    table = astensor(table)
    if table.ndim != 2:
        raise DimensionError(f"take_rows expects a 2-d table, got {table.shape}")
    idx = np.asarray(indices)
    out = table.data[idx.ravel()].reshape(idx.shape + (table.shape[1],))
    tshape = table.data.shape

    def backward_fn(g):
        gt = np.zeros(tshape, dtype=g.dtype)
        np.add.at(gt, idx.ravel(), g.reshape(-1, tshape[1]))
        return (gt,)

    return custom_op(out, (table,), backward_fn)


def frobenius_norm(x) -> DiffTensor:
    """sqrt of the sum of squares; subgradient 0 at the exact zero point."""
    x = astensor(x)
    n = float(np.sqrt((x.data * x.data).sum()))
    d = x.data

    def backward_fn(g):
        if n == 0.0:
            return (np.zeros_like(d),)
        return (g * d / n,)

    return custom_op(np.asarray(n, dtype=x.dtype), (x,), backward_fn)
