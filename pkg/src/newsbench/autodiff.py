"""Dense-tensor numerics with reverse-mode automatic differentiation.

A thread-local `Tape` records every operation whose inputs require gradients,
in execution order (which is a topological order). `Tape.backward` walks the
record once in reverse, accumulating gradients with + across fan-out, then
clears the tape. Ops executed with no active tape (evaluation, finite
differences) are plain numpy forward passes.

Float32 is the training default; build tensors from float64 arrays for
gradient-check accuracy. Set NEWSBENCH_DEBUG=1 to assert that every op output
is finite.
"""

from __future__ import annotations

import math
import os
import threading
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericsError, ShapeError

DEFAULT_DTYPE = np.float32

_tls = threading.local()


def debug_enabled() -> bool:
    return os.environ.get("NEWSBENCH_DEBUG", "0") == "1"


class Tensor:
    """Dense array with an optional gradient slot.

    Leaf tensors created with requires_grad=True receive gradients from
    `Tape.backward`; op outputs inherit requires_grad from their inputs so the
    chain keeps recording.
    """

    __slots__ = ("data", "requires_grad", "_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if dtype is not None:
            self.data = np.asarray(data, dtype=dtype)
        elif isinstance(data, (np.ndarray, np.generic)):
            # keep the caller's dtype (np.generic covers 0-d reduction results)
            self.data = np.asarray(data)
        else:
            self.data = np.asarray(data, dtype=DEFAULT_DTYPE)
        self.requires_grad = bool(requires_grad)
        self._grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def grad(self) -> Optional[np.ndarray]:
        """Accumulated gradient; zeros when this tensor requires a gradient but
        no backward path reached it (a detached leaf)."""
        if self._grad is not None:
            return self._grad
        if self.requires_grad:
            return np.zeros_like(self.data)
        return None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self._grad is None:
            self._grad = g.astype(self.data.dtype, copy=True)
        else:
            self._grad += g

    def zero_grad(self) -> None:
        self._grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # sugar used sparingly in model code
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered op record for one backward pass. One tape per training thread;
    tapes are never shared."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_tls, "stack", None)
        if stack is None:
            stack = _tls.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _tls.stack.pop()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable) -> None:
        self._nodes.append((out, inputs, backward_fn))

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss) = 1 and propagate through the record in
        reverse. Gradients land on the leaf tensors' `.grad`; the tape is
        cleared afterwards."""
        if loss.data.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if not np.isfinite(loss.data):
            raise NumericsError(f"backward needs a finite loss, got {float(loss.data)}")
        produced = {id(out) for out, _, _ in self._nodes}
        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, inputs, backward_fn in reversed(self._nodes):
            g_out = pending.pop(id(out), None)
            if g_out is None:
                continue  # this output does not feed the loss
            for tensor, g_in in zip(inputs, backward_fn(g_out)):
                if g_in is None:
                    continue
                if id(tensor) in produced:
                    acc = pending.get(id(tensor))
                    pending[id(tensor)] = g_in if acc is None else acc + g_in
                elif tensor.requires_grad:
                    tensor.accumulate_grad(g_in)
        self._nodes.clear()


def active_tape() -> Optional[Tape]:
    stack = getattr(_tls, "stack", None)
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    tape = tape if tape is not None else active_tape()
    if tape is None:
        raise NumericsError("backward called with no active tape")
    tape.backward(loss)


# ---------------------------------------------------------------------------
# op plumbing

def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _finish(name: str, data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn: Callable) -> Tensor:
    if debug_enabled() and not np.all(np.isfinite(data)):
        raise NumericsError(f"{name}: non-finite values in output")
    requires = any(t.requires_grad for t in inputs)
    tape = active_tape()
    out = Tensor(data, requires_grad=requires and tape is not None)
    if out.requires_grad:
        tape.record(out, inputs, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `g` down to `shape`, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# core ops

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _finish("add", data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _finish("mul", data, (a, b), backward_fn)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        data = a.data @ b.data
    except ValueError:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward_fn(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _finish("matmul", data, (a, b), backward_fn)


def softmax(x, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """Shift-stable softmax. With a 0/1 `mask` (broadcastable to x), masked
    positions get probability exactly 0 and the rest renormalize; every row
    must keep at least one unmasked entry."""
    x = _as_tensor(x)
    if mask is None:
        shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
        e = np.exp(shifted)
        denom = np.sum(e, axis=axis, keepdims=True)
    else:
        mask = np.broadcast_to(np.asarray(mask), x.shape)
        keep = mask != 0
        if not np.all(np.any(keep, axis=axis)):
            raise NumericsError("softmax: a row is fully masked")
        neg = np.where(keep, x.data, -np.inf)
        shifted = x.data - np.max(neg, axis=axis, keepdims=True)
        e = np.where(keep, np.exp(shifted), 0.0).astype(x.data.dtype)
        denom = np.sum(e, axis=axis, keepdims=True)
    s = e / denom

    def backward_fn(g):
        dot = np.sum(g * s, axis=axis, keepdims=True)
        return (s * (g - dot),)

    return _finish("softmax", s, (x,), backward_fn)


def layer_norm(x, gain, bias, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalize along `axis` to mean 0 / variance 1, then scale and shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    mu = np.mean(x.data, axis=axis, keepdims=True)
    centered = x.data - mu
    var = np.mean(centered * centered, axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    data = gain.data * xhat + bias.data

    def backward_fn(g):
        n = x.shape[axis]
        gxhat = g * gain.data
        gx = inv_std * (
            gxhat
            - np.mean(gxhat, axis=axis, keepdims=True)
            - xhat * np.mean(gxhat * xhat, axis=axis, keepdims=True)
        )
        ggain = _unbroadcast(g * xhat, gain.shape)
        gbias = _unbroadcast(g, bias.shape)
        return gx.astype(x.data.dtype), ggain, gbias

    return _finish("layer_norm", data, (x, gain, bias), backward_fn)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    data = np.maximum(x.data, 0)

    def backward_fn(g):
        return (g * (x.data > 0),)

    return _finish("relu", data, (x,), backward_fn)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x) -> Tensor:
    """tanh approximation of the Gaussian-error linear unit."""
    x = _as_tensor(x)
    inner = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(inner)
    data = 0.5 * x.data * (1.0 + t)

    def backward_fn(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x.data ** 2)
        dt = (1.0 - t * t) * dinner
        return (g * (0.5 * (1.0 + t) + 0.5 * x.data * dt),)

    return _finish("gelu", data, (x,), backward_fn)


def dropout(x, rate: float, rng: Optional[np.random.Generator] = None, training: bool = True) -> Tensor:
    """Inverted dropout: kept activations are scaled by 1/(1-rate) at train
    time so evaluation needs no rescaling. rate 0 (or eval mode) is identity."""
    x = _as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise NumericsError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0 or not training:
        return x
    if rng is None:
        raise NumericsError("dropout with rate > 0 needs an rng")
    scale = 1.0 / (1.0 - rate)
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) * scale
    data = x.data * keep

    def backward_fn(g):
        return (g * keep,)

    return _finish("dropout", data, (x,), backward_fn)


def embedding_lookup(table, ids) -> Tensor:
    """Row gather: out[..., :] = table[ids[...], :]."""
    table = _as_tensor(table)
    idx = np.asarray(ids)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError(f"embedding ids must be integers, got dtype {idx.dtype}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(
            f"embedding ids out of range [0, {table.shape[0]}) "
            f"(min {int(idx.min())}, max {int(idx.max())})"
        )
    data = table.data[idx]

    def backward_fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _finish("embedding_lookup", data, (table,), backward_fn)


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    axes = tuple(axes)
    data = np.transpose(x.data, axes)
    inverse = tuple(np.argsort(axes))

    def backward_fn(g):
        return (np.transpose(g, inverse),)

    return _finish("transpose", data, (x,), backward_fn)


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"cannot reshape {x.shape} to {tuple(shape)}") from None

    def backward_fn(g):
        return (g.reshape(x.shape),)

    return _finish("reshape", data, (x,), backward_fn)


def take(x, index: int, axis: int) -> Tensor:
    """Select one slice along `axis` (e.g. the CLS position), dropping the axis."""
    x = _as_tensor(x)
    if not -x.shape[axis] <= index < x.shape[axis]:
        raise ShapeError(f"take: index {index} out of bounds for axis {axis} of {x.shape}")
    data = np.take(x.data, index, axis=axis)

    def backward_fn(g):
        gx = np.zeros_like(x.data)
        sel = [slice(None)] * x.ndim
        sel[axis] = index
        gx[tuple(sel)] = g
        return (gx,)

    return _finish("take", data, (x,), backward_fn)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    data = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.data.size if axis is None else np.prod(
        [x.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return ((np.ones_like(x.data) * g) / count,)

    return _finish("mean", data, (x,), backward_fn)


def cross_entropy(logits, labels) -> Tensor:
    """Mean softmax cross-entropy of [B, C] logits against [B] integer labels."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects [batch, classes] logits, got {logits.shape}")
    if labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"cross_entropy: labels shape {labels.shape} does not match batch {logits.shape[0]}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ShapeError(f"cross_entropy: label outside [0, {logits.shape[1]})")
    b = logits.shape[0]
    m = np.max(logits.data, axis=1, keepdims=True)
    shifted = logits.data - m
    lse = np.log(np.sum(np.exp(shifted), axis=1)) + m[:, 0]
    nll = lse - logits.data[np.arange(b), labels]
    data = np.asarray(np.mean(nll), dtype=logits.data.dtype)

    def backward_fn(g):
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[np.arange(b), labels] -= 1.0
        return ((g * probs / b).astype(logits.data.dtype),)

    return _finish("cross_entropy", data, (logits,), backward_fn)


def softmax_probs(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Plain-numpy stable softmax for evaluation paths (no tape)."""
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)
