"""Dense 2-D tensors with a minimal reverse-mode differentiation tape.

Everything downstream (attention, decoder, temporal interaction) is built
from the small op set in this module, so gradient checks of the full
pipeline reduce to correctness of these primitives. Values are immutable
once produced and ops are pure; a tape must stay confined to one thread.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class NumericError(ArithmeticError):
    """A non-finite value (NaN/Inf) appeared where one is not allowed."""


class StateError(RuntimeError):
    """Operation applied to an object in the wrong state."""


class Tensor2:
    """Immutable dense matrix, row-major, float64 by default.

    A Tensor2 may be attached to a :class:`Tape`, in which case the ops in
    this module record how it was produced so adjoints can be propagated
    backward. Constants (no tape) mix freely with taped values.
    """

    __slots__ = ("data", "tape", "grad", "_backward", "_parents")

    def __init__(self, data, tape: Optional["Tape"] = None, dtype=np.float64):
        arr = np.array(data, dtype=dtype, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"Tensor2 requires 2-D data, got ndim={arr.ndim}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise NumericError("non-finite values in tensor")
        arr.flags.writeable = False
        self.data = arr
        self.tape = tape
        self.grad: Optional[np.ndarray] = None
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._parents: tuple = ()

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on shape {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor2({self.rows}x{self.cols}, taped={self.tape is not None})"


class Tape:
    """Operation recorder for reverse-mode differentiation.

    Nodes are appended in creation order, which is a topological order of
    the computation graph; replaying them reversed visits each node in
    reverse topological order exactly once.
    """

    def __init__(self):
        self._nodes: list[Tensor2] = []

    def leaf(self, data, dtype=np.float64) -> Tensor2:
        """Register an input whose gradient should be accumulated."""
        t = Tensor2(data, tape=self, dtype=dtype)
        self._nodes.append(t)
        return t

    def _record(self, t: Tensor2) -> None:
        self._nodes.append(t)

    def backward(self, out: Tensor2) -> None:
        """Accumulate d(out)/d(leaf) into every node's ``grad``."""
        if out.tape is not self:
            raise StateError("output was not recorded on this tape")
        if out.data.size != 1:
            raise ShapeError("backward requires a 1x1 output")
        for node in self._nodes:
            node.grad = None
        out.grad = np.ones_like(out.data)
        for node in reversed(self._nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)


def _result_tape(*ts: Tensor2) -> Optional[Tape]:
    tape = None
    for t in ts:
        if t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise StateError("operands live on different tapes")
            tape = t.tape
    return tape


def _accum(t: Tensor2, g: np.ndarray) -> None:
    if t.tape is None:
        return
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad = t.grad + g


def _make(data: np.ndarray, parents: tuple, backward) -> Tensor2:
    tape = _result_tape(*parents)
    out = Tensor2(data, tape=tape)
    if tape is not None:
        out._parents = parents
        out._backward = backward
        tape._record(out)
    return out


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g back down to a broadcast operand's shape."""
    if g.shape == shape:
        return g
    out = g
    if shape[0] == 1 and g.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    if out.shape != shape:
        raise ShapeError(f"cannot reduce gradient {g.shape} to {shape}")
    return out


def _broadcastable(a: Tensor2, b: Tensor2) -> None:
    ok_rows = a.rows == b.rows or a.rows == 1 or b.rows == 1
    ok_cols = a.cols == b.cols or a.cols == 1 or b.cols == 1
    if not (ok_rows and ok_cols):
        raise ShapeError(f"shapes {a.shape} and {b.shape} do not broadcast")


def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    """Matrix product a @ b."""
    if a.cols != b.rows:
        raise ShapeError(f"matmul {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def add(a: Tensor2, b: Tensor2) -> Tensor2:
    """Elementwise sum; row or column vectors expand against matrices."""
    _broadcastable(a, b)
    data = a.data + b.data

    def backward(g):
        _accum(a, _reduce_to(g, a.shape))
        _accum(b, _reduce_to(g, b.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor2, b: Tensor2) -> Tensor2:
    """Elementwise (Hadamard) product with row/column expansion."""
    _broadcastable(a, b)
    data = a.data * b.data

    def backward(g):
        _accum(a, _reduce_to(g * b.data, a.shape))
        _accum(b, _reduce_to(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def scale(a: Tensor2, c: float) -> Tensor2:
    """Multiply by a python scalar constant (not differentiated w.r.t. c)."""
    c = float(c)
    data = a.data * c

    def backward(g):
        _accum(a, g * c)

    return _make(data, (a,), backward)


def sigmoid(a: Tensor2) -> Tensor2:
    """Elementwise logistic function, overflow-safe on both tails."""
    x = a.data
    data = np.empty_like(x)
    pos = x >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    data[~pos] = ex / (1.0 + ex)

    def backward(g):
        _accum(a, g * data * (1.0 - data))

    return _make(data, (a,), backward)


def relu(a: Tensor2) -> Tensor2:
    data = np.maximum(a.data, 0.0)

    def backward(g):
        _accum(a, g * (a.data > 0))

    return _make(data, (a,), backward)


def softmax_rows(a: Tensor2) -> Tensor2:
    """Row-wise softmax computed with max-subtraction for stability."""
    x = a.data
    if x.shape[0] == 0:
        return _make(x.copy(), (a,), lambda g: _accum(a, g))
    shifted = x - x.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    data = ex / ex.sum(axis=1, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=1, keepdims=True)
        _accum(a, data * (g - inner))

    return _make(data, (a,), backward)


def concat_rows(a: Tensor2, b: Tensor2) -> Tensor2:
    """Stack vertically: [a; b]."""
    if a.cols != b.cols and a.cols != 0 and b.cols != 0:
        raise ShapeError(f"concat_rows {a.shape} ; {b.shape}")
    if a.rows == 0:
        return _make(b.data.copy(), (a, b), lambda g: _accum(b, g))
    if b.rows == 0:
        return _make(a.data.copy(), (a, b), lambda g: _accum(a, g))
    data = np.vstack([a.data, b.data])
    na = a.rows

    def backward(g):
        _accum(a, g[:na])
        _accum(b, g[na:])

    return _make(data, (a, b), backward)


def concat_cols(a: Tensor2, b: Tensor2) -> Tensor2:
    """Stack horizontally: [a | b]."""
    if a.rows != b.rows:
        raise ShapeError(f"concat_cols {a.shape} | {b.shape}")
    data = np.hstack([a.data, b.data])
    na = a.cols

    def backward(g):
        _accum(a, g[:, :na])
        _accum(b, g[:, na:])

    return _make(data, (a, b), backward)


def slice_rows(a: Tensor2, start: int, stop: int) -> Tensor2:
    if not (0 <= start <= stop <= a.rows):
        raise ShapeError(f"slice_rows [{start}:{stop}] of {a.shape}")
    data = a.data[start:stop].copy()

    def backward(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        _accum(a, full)

    return _make(data, (a,), backward)


def slice_cols(a: Tensor2, start: int, stop: int) -> Tensor2:
    if not (0 <= start <= stop <= a.cols):
        raise ShapeError(f"slice_cols [{start}:{stop}] of {a.shape}")
    data = a.data[:, start:stop].copy()

    def backward(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        _accum(a, full)

    return _make(data, (a,), backward)


def transpose(a: Tensor2) -> Tensor2:
    data = a.data.T.copy()

    def backward(g):
        _accum(a, g.T)

    return _make(data, (a,), backward)


def sum_all(a: Tensor2) -> Tensor2:
    """Sum of all entries as a 1x1 tensor."""
    data = np.array([[a.data.sum()]])

    def backward(g):
        _accum(a, np.full_like(a.data, g[0, 0]))

    return _make(data, (a,), backward)


def mean_all(a: Tensor2) -> Tensor2:
    """Mean of all entries as a 1x1 tensor."""
    if a.data.size == 0:
        raise ShapeError("mean of an empty tensor")
    n = a.data.size
    data = np.array([[a.data.sum() / n]])

    def backward(g):
        _accum(a, np.full_like(a.data, g[0, 0] / n))

    return _make(data, (a,), backward)


def grad_check(f: Callable[[Tensor2], Tensor2], x, eps: float = 1e-5) -> float:
    """Compare analytic gradients of a taped scalar function against
    central finite differences.

    Returns max over components of |analytic - numeric| / (|analytic| + 1e-12).
    """
    base = x.data if isinstance(x, Tensor2) else np.asarray(x, dtype=np.float64)
    if not (1e-7 <= eps <= 1e-4):
        raise ValueError(f"eps={eps} outside [1e-7, 1e-4]")

    tape = Tape()
    leaf = tape.leaf(base)
    out = f(leaf)
    tape.backward(out)
    if leaf.grad is None:
        analytic = np.zeros_like(base)
    else:
        analytic = leaf.grad

    numeric = np.zeros_like(base)
    flat = base.ravel()
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + eps
        fp = f(Tensor2(bumped.reshape(base.shape))).item()
        bumped[i] = flat[i] - eps
        fm = f(Tensor2(bumped.reshape(base.shape))).item()
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError("non-finite intermediate in finite differencing")
        numeric.ravel()[i] = (fp - fm) / (2.0 * eps)

    rel = np.abs(analytic - numeric) / (np.abs(analytic) + 1e-12)
    return float(rel.max()) if rel.size else 0.0
