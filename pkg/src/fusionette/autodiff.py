"""Dense float64 tensors with reverse-mode autodiff on a dynamic tape.

Everything is numpy underneath. Supported shapes are what the fusion
pipeline needs: scalars, vectors, matrices, and 3-D stacks of matrices
with a leading batch axis. Ops record onto the thread-local active tape
only while a ``Tape`` block is open and the result needs gradients, so
forward passes outside a tape run as plain numpy (inference mode).

The tape is rebuilt for every forward pass; walking it in reverse visits
each recorded op exactly once and accumulates (never overwrites)
gradients, so fan-out comes out right.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, TrainingError

Array = np.ndarray

# grad_fn: maps the output gradient to one gradient per input (None for
# inputs that need none).
GradFn = Callable[[Array], tuple]


class Tensor:
    """A dense float64 array plus an optional same-shape gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


class _TapeEntry:
    __slots__ = ("op", "inputs", "output", "grad_fn")

    def __init__(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, grad_fn: GradFn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.grad_fn = grad_fn


_TLS = threading.local()


def _tape_stack() -> list:
    stack = getattr(_TLS, "stack", None)
    if stack is None:
        stack = _TLS.stack = []
    return stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Execution-ordered record of ops for one backward pass.

    Usable as a context manager; ops executed inside the block are
    recorded in the order they run, which is a topological order by
    construction (an op cannot run before its inputs exist).
    """

    def __init__(self):
        self._entries: list[_TapeEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _tape_stack().pop()

    def backward(self, loss: Tensor) -> None:
        """Populate .grad for every requires_grad tensor reachable from loss."""
        if loss.shape != ():
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape is not self:
            raise ValueError("loss was not recorded on this tape")
        seed = np.ones((), dtype=np.float64)
        loss.grad = seed if loss.grad is None else loss.grad + seed
        for entry in reversed(self._entries):
            out_grad = entry.output.grad
            if out_grad is None:
                continue
            for inp, g in zip(entry.inputs, entry.grad_fn(out_grad)):
                if g is None or not inp.requires_grad:
                    continue
                if inp.grad is None:
                    inp.grad = np.array(g, dtype=np.float64)
                else:
                    inp.grad = inp.grad + g


def backward(loss: Tensor) -> None:
    """Run reverse-mode accumulation from a scalar loss over its tape."""
    if loss.shape != ():
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None:
        raise ValueError("loss was not recorded on a tape (no Tape block was open)")
    loss._tape.backward(loss)


def sgd_step(params: Sequence[Tensor], lr: float) -> None:
    """Plain SGD update p <- p - lr * grad, then zero the gradients."""
    for p in params:
        if p.grad is None:
            raise TrainingError("sgd_step: parameter has no gradient (backward not run?)")
        if p.grad.shape != p.data.shape:
            raise DimensionError(
                f"sgd_step: gradient shape {p.grad.shape} != parameter shape {p.data.shape}"
            )
    for p in params:
        p.data = p.data - lr * p.grad
        p.grad = np.zeros_like(p.data)


def _promote(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op: str, inputs: tuple[Tensor, ...], out: Tensor, grad_fn: GradFn) -> Tensor:
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape._entries.append(_TapeEntry(op, inputs, out, grad_fn))
        out._tape = tape
    return out


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


# Elementwise ops support exactly the broadcasts the models use: equal
# shapes, a scalar operand, or a trailing-dim bias vector.


def _broadcast_ok(a_shape, b_shape) -> bool:
    if a_shape == b_shape:
        return True
    for small, big in ((a_shape, b_shape), (b_shape, a_shape)):
        if small == () or (len(big) >= 1 and small == big[-1:]):
            return True
    return False


def _reduce_to(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum g over the axes that were broadcast so it matches shape."""
    if g.shape == shape:
        return g
    if shape == ():
        return g.sum()
    return g.reshape(-1, shape[0]).sum(axis=0)


def add(a, b) -> Tensor:
    a, b = _promote(a), _promote(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data + b.data, _needs_grad(a, b))

    def grad_fn(g: Array):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _record("add", (a, b), out, grad_fn)


def sub(a, b) -> Tensor:
    a, b = _promote(a), _promote(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise DimensionError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data - b.data, _needs_grad(a, b))

    def grad_fn(g: Array):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return _record("sub", (a, b), out, grad_fn)


def mul(a, b) -> Tensor:
    a, b = _promote(a), _promote(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise DimensionError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data * b.data, _needs_grad(a, b))

    def grad_fn(g: Array):
        return _reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)

    return _record("mul", (a, b), out, grad_fn)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a non-learnable constant."""
    c = float(c)
    out = Tensor(a.data * c, a.requires_grad)

    def grad_fn(g: Array):
        return (g * c,)

    return _record("scale", (a,), out, grad_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: 2-D x 2-D, batched 3-D x 3-D, or 3-D x shared 2-D."""
    a, b = _promote(a), _promote(b)
    ok = (
        (a.ndim == 2 and b.ndim == 2 and a.shape[1] == b.shape[0])
        or (a.ndim == 3 and b.ndim == 3 and a.shape[0] == b.shape[0] and a.shape[2] == b.shape[1])
        or (a.ndim == 3 and b.ndim == 2 and a.shape[2] == b.shape[0])
    )
    if not ok:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data, _needs_grad(a, b))

    def grad_fn(g: Array):
        if b.ndim == 2 and a.ndim == 3:
            ga = g @ b.data.T
            k, m = b.shape
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, m)
        else:
            ga = g @ np.swapaxes(b.data, -1, -2)
            gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return _record("matmul", (a, b), out, grad_fn)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes (plain transpose for matrices)."""
    if a.ndim < 2:
        raise DimensionError(f"transpose needs ndim >= 2, got shape {a.shape}")
    out = Tensor(np.swapaxes(a.data, -1, -2), a.requires_grad)

    def grad_fn(g: Array):
        return (np.swapaxes(g, -1, -2),)

    return _record("transpose", (a,), out, grad_fn)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if a.size != math.prod(shape):
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}")
    out = Tensor(a.data.reshape(shape), a.requires_grad)

    def grad_fn(g: Array):
        return (g.reshape(a.shape),)

    return _record("reshape", (a,), out, grad_fn)


def narrow_last(a: Tensor, start: int, length: int) -> Tensor:
    """Slice [start, start+length) along the last axis."""
    width = a.shape[-1] if a.ndim else 0
    if not (0 <= start and start + length <= width):
        raise DimensionError(f"narrow_last: [{start}:{start + length}) out of range for {a.shape}")
    out = Tensor(a.data[..., start : start + length].copy(), a.requires_grad)

    def grad_fn(g: Array):
        full = np.zeros(a.shape, dtype=np.float64)
        full[..., start : start + length] = g
        return (full,)

    return _record("narrow_last", (a,), out, grad_fn)


def concat_last(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis; all leading dims must match."""
    a, b = _promote(a), _promote(b)
    if a.ndim != b.ndim or a.ndim == 0 or a.shape[:-1] != b.shape[:-1]:
        raise DimensionError(f"concat_last: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(np.concatenate([a.data, b.data], axis=-1), _needs_grad(a, b))
    wa = a.shape[-1]

    def grad_fn(g: Array):
        return g[..., :wa], g[..., wa:]

    return _record("concat_last", (a, b), out, grad_fn)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, with max subtraction for stability."""
    if x.ndim < 1:
        raise DimensionError("softmax_rows needs at least one axis")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, x.requires_grad)

    def grad_fn(g: Array):
        dot = (g * s).sum(axis=-1, keepdims=True)
        return (s * (g - dot),)

    return _record("softmax_rows", (x,), out, grad_fn)


def sigmoid(x: Tensor) -> Tensor:
    data = x.data
    s = np.empty_like(data)
    pos = data >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-data[pos]))
    e = np.exp(data[~pos])
    s[~pos] = e / (1.0 + e)
    out = Tensor(s, x.requires_grad)

    def grad_fn(g: Array):
        return (g * s * (1.0 - s),)

    return _record("sigmoid", (x,), out, grad_fn)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0), x.requires_grad)

    def grad_fn(g: Array):
        # subgradient 0 at exactly x == 0
        return (g * (x.data > 0.0),)

    return _record("relu", (x,), out, grad_fn)


def sum_all(x: Tensor) -> Tensor:
    """Reduce to a scalar (handy head for gradient checks)."""
    out = Tensor(x.data.sum(), x.requires_grad)

    def grad_fn(g: Array):
        return (np.broadcast_to(g, x.shape).astype(np.float64),)

    return _record("sum_all", (x,), out, grad_fn)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean categorical cross-entropy of logits[b x c] against class indices.

    Fused log-sum-exp keeps huge logits finite; the recorded gradient is
    (softmax - onehot) / b.
    """
    y = np.asarray(labels)
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be 2-D, got {logits.shape}")
    b, c = logits.shape
    if b == 0:
        raise DimensionError("cross_entropy: empty batch")
    if y.shape != (b,):
        raise DimensionError(f"cross_entropy: labels shape {y.shape} != ({b},)")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError("cross_entropy: labels must be integer class indices")
    if y.min() < 0 or y.max() >= c:
        raise ValueError(f"cross_entropy: label out of range [0, {c})")
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    rows = np.arange(b)
    out = Tensor((lse - z[rows, y]).mean(), logits.requires_grad)

    def grad_fn(g: Array):
        soft = np.exp(z - m)
        soft /= soft.sum(axis=1, keepdims=True)
        soft[rows, y] -= 1.0
        return (soft * (g / b),)

    return _record("cross_entropy", (logits,), out, grad_fn)
