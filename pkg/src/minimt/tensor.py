"""Dense float64 tensors with a reverse-mode autodiff tape.

The primitive set is small on purpose: just enough to express a
GRU/attention/softmax translation network together with its losses.
Everything is numpy-backed and 64-bit. Operations are recorded on the
innermost active :class:`Graph` whenever at least one input carries a
gradient slot; with no graph active, the same functions run as plain
(frozen) array math, which is what decoding and sampling use.

Shape discipline is strict: elementwise operations accept identical
shapes, plus the single special case of adding or scaling a matrix by a
trailing bias vector. Anything else raises :class:`ShapeError` naming
the operation and the offending shapes.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Graph",
    "ShapeError",
    "active_graph",
    "backward",
    "clip_global_norm",
    "forward_op",
    "matmul",
    "add",
    "mul",
    "sigmoid",
    "tanh",
    "softmax_rows",
    "masked_softmax_rows",
    "log_softmax_rows",
    "concat",
    "slice_axis",
    "tsum",
    "tmean",
    "lookup_rows",
    "log",
    "exp",
    "maximum_pairwise",
    "reshape",
    "scale_rows",
    "pick_rows",
    "smul",
    "sadd",
    "ssub",
]


class ShapeError(ValueError):
    """Operand shapes do not conform for an operation."""


class Tensor:
    """A dense float64 array with an optional same-shape gradient slot.

    ``track=True`` allocates a zero gradient buffer; such tensors are the
    leaves (parameters, inputs) that :func:`backward` fills in. Tensors
    produced by operations get a gradient slot automatically while a
    graph is recording.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, track: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data) if track else None

    @classmethod
    def _wrap(cls, arr: np.ndarray, track: bool) -> "Tensor":
        t = object.__new__(cls)
        t.data = arr
        t.grad = np.zeros_like(arr) if track else None
        return t

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        return self.grad is not None

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, tracked={self.tracked})"


class _OpNode:
    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op, inputs, output, backward_fn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


_GRAPH_STACK: list["Graph"] = []


class Graph:
    """An ordered tape of recorded operations.

    Topological order equals recording order, so reverse-mode traversal
    is simply the reversed node list. Graphs are context managers; the
    innermost entered graph is the active recording target.
    """

    def __init__(self):
        self.nodes: list[_OpNode] = []

    def __enter__(self) -> "Graph":
        _GRAPH_STACK.append(self)
        return self

    def __exit__(self, *exc) -> bool:
        popped = _GRAPH_STACK.pop()
        assert popped is self, "graphs closed out of order"
        return False

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor,
               backward_fn: Callable[[Tensor], None]) -> None:
        self.nodes.append(_OpNode(op, tuple(inputs), output, backward_fn))

    def backward(self, loss: Tensor) -> None:
        backward(self, loss)


def active_graph() -> Graph | None:
    return _GRAPH_STACK[-1] if _GRAPH_STACK else None


def backward(graph: Graph, loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every tracked leaf's grad.

    Gradients of tensors produced on the tape are reset at the start of
    each call, so leaf gradients add up across repeated calls (calling
    twice doubles them). A constant (untracked) loss is a no-op, as is an
    empty graph.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not graph.nodes:
        return
    if loss.grad is None:
        # Loss does not depend on any tracked tensor; all grads are zero.
        return
    produced = {id(n.output) for n in graph.nodes}
    if id(loss) not in produced:
        raise ValueError("loss was not produced on this graph")
    for n in graph.nodes:
        if n.output.grad is not None:
            n.output.grad[...] = 0.0
    loss.grad[...] = 1.0
    for n in reversed(graph.nodes):
        n.backward_fn(n.output)


def _result(op: str, inputs: Sequence[Tensor], out_data: np.ndarray,
            backward_fn: Callable[[Tensor], None]) -> Tensor:
    g = active_graph()
    track = g is not None and any(t.grad is not None for t in inputs)
    out = Tensor._wrap(out_data, track)
    if track:
        g.record(op, inputs, out, backward_fn)
    return out


def _shape_err(op: str, *tensors: Tensor) -> ShapeError:
    shapes = " vs ".join(str(t.shape) for t in tensors)
    return ShapeError(f"{op}: incompatible shapes {shapes}")


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_err("matmul", a, b)

    def bwd(out):
        g = out.grad
        if a.grad is not None:
            a.grad += g @ b.data.T
        if b.grad is not None:
            b.grad += a.data.T @ g

    return _result("matmul", (a, b), a.data @ b.data, bwd)


def _is_trailing_bias(a: Tensor, b: Tensor) -> bool:
    return a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        def bwd(out):
            g = out.grad
            if a.grad is not None:
                a.grad += g
            if b.grad is not None:
                b.grad += g
    elif _is_trailing_bias(a, b):
        def bwd(out):
            g = out.grad
            if a.grad is not None:
                a.grad += g
            if b.grad is not None:
                b.grad += g.sum(axis=0)
    else:
        raise _shape_err("add", a, b)
    return _result("add", (a, b), a.data + b.data, bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product. When both operands are tracked the first is
    treated as the gate and the second as the signal by downstream
    relevance propagation; gradients are unaffected."""
    if a.shape == b.shape:
        def bwd(out):
            g = out.grad
            if a.grad is not None:
                a.grad += g * b.data
            if b.grad is not None:
                b.grad += g * a.data
    elif _is_trailing_bias(a, b):
        def bwd(out):
            g = out.grad
            if a.grad is not None:
                a.grad += g * b.data
            if b.grad is not None:
                b.grad += (g * a.data).sum(axis=0)
    else:
        raise _shape_err("mul", a, b)
    return _result("mul", (a, b), a.data * b.data, bwd)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad * o.data * (1.0 - o.data)

    return _result("sigmoid", (x,), out, bwd)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad * (1.0 - o.data * o.data)

    return _result("tanh", (x,), out, bwd)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad * o.data

    return _result("exp", (x,), out, bwd)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise ValueError("log: requires strictly positive entries")
    out = np.log(x.data)

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad / x.data

    return _result("log", (x,), out, bwd)


def _softmax_data(d: np.ndarray) -> np.ndarray:
    shifted = d - d.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(x: Tensor) -> Tensor:
    if x.data.ndim != 2 or x.shape[1] == 0:
        raise _shape_err("softmax_rows", x)
    out = _softmax_data(x.data)

    def bwd(o):
        if x.grad is not None:
            g = o.grad
            s = o.data
            x.grad += s * (g - (g * s).sum(axis=1, keepdims=True))

    return _result("softmax_rows", (x,), out, bwd)


def masked_softmax_rows(x: Tensor, mask: np.ndarray) -> Tensor:
    """Row softmax over positions where mask is 1; masked entries are
    exactly zero in the output. The mask is a constant, never tracked."""
    if x.data.ndim != 2 or mask.shape != x.shape:
        raise _shape_err("masked_softmax_rows", x)
    m = np.asarray(mask, dtype=np.float64)
    if np.any(m.sum(axis=1) == 0.0):
        raise ValueError("masked_softmax_rows: a row has all positions masked")
    neg = np.where(m > 0.0, x.data, -np.inf)
    shifted = x.data - neg.max(axis=1, keepdims=True)
    e = np.exp(shifted) * m
    out = e / e.sum(axis=1, keepdims=True)

    def bwd(o):
        if x.grad is not None:
            g = o.grad
            s = o.data
            x.grad += s * (g - (g * s).sum(axis=1, keepdims=True))

    return _result("masked_softmax_rows", (x,), out, bwd)


def log_softmax_rows(x: Tensor) -> Tensor:
    """Fused log-softmax per row, the numerically safe NLL path."""
    if x.data.ndim != 2 or x.shape[1] == 0:
        raise _shape_err("log_softmax_rows", x)
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - lse

    def bwd(o):
        if x.grad is not None:
            g = o.grad
            x.grad += g - np.exp(o.data) * g.sum(axis=1, keepdims=True)

    return _result("log_softmax_rows", (x,), out, bwd)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat: empty input list")
    nd = tensors[0].data.ndim
    if any(t.data.ndim != nd for t in tensors) or axis >= nd:
        raise _shape_err("concat", *tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def bwd(o):
        g = o.grad
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.grad is not None:
                idx = [slice(None)] * nd
                idx[axis] = slice(start, stop)
                t.grad += g[tuple(idx)]

    return _result("concat", tuple(tensors), out, bwd)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    nd = x.data.ndim
    if axis >= nd or not (0 <= start < stop <= x.shape[axis]):
        raise ShapeError(
            f"slice: [{start}:{stop}] on axis {axis} of shape {x.shape}")
    idx = [slice(None)] * nd
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = x.data[idx].copy()

    def bwd(o):
        if x.grad is not None:
            x.grad[idx] += o.grad

    return _result("slice", (x,), out, bwd)


def tsum(x: Tensor, axis: int | None = None) -> Tensor:
    out = x.data.sum(axis=axis)

    def bwd(o):
        if x.grad is not None:
            if axis is None:
                x.grad += o.grad
            else:
                x.grad += np.expand_dims(o.grad, axis)

    return _result("sum", (x,), np.asarray(out), bwd)


def tmean(x: Tensor) -> Tensor:
    n = x.data.size
    out = np.asarray(x.data.mean())

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad / n

    return _result("mean", (x,), out, bwd)


def lookup_rows(table: Tensor, ids) -> Tensor:
    """Row gather: out[i] = table[ids[i]]. Backward scatters additively,
    so repeated ids accumulate."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2 or ids.ndim != 1:
        raise _shape_err("lookup_rows", table)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ValueError(
            f"lookup_rows: id out of range for table with {table.shape[0]} rows")
    out = table.data[ids]

    def bwd(o):
        if table.grad is not None:
            np.add.at(table.grad, ids, o.grad)

    return _result("lookup_rows", (table,), out, bwd)


def pick_rows(x: Tensor, ids) -> Tensor:
    """Per-row column pick: out[i, 0] = x[i, ids[i]]."""
    ids = np.asarray(ids, dtype=np.int64)
    if x.data.ndim != 2 or ids.shape != (x.shape[0],):
        raise _shape_err("pick_rows", x)
    if ids.size and (ids.min() < 0 or ids.max() >= x.shape[1]):
        raise ValueError(f"pick_rows: id out of range for {x.shape[1]} columns")
    rows = np.arange(x.shape[0])
    out = x.data[rows, ids].reshape(-1, 1)

    def bwd(o):
        if x.grad is not None:
            np.add.at(x.grad, (rows, ids), o.grad[:, 0])

    return _result("pick_rows", (x,), out, bwd)


def maximum_pairwise(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise _shape_err("maximum_pairwise", a, b)
    out = np.maximum(a.data, b.data)

    def bwd(o):
        take_a = a.data >= b.data  # ties go to the first operand
        if a.grad is not None:
            a.grad += o.grad * take_a
        if b.grad is not None:
            b.grad += o.grad * ~take_a

    return _result("maximum_pairwise", (a, b), out, bwd)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    if int(np.prod(shape)) != x.data.size:
        raise ShapeError(f"reshape: {x.shape} -> {shape}")
    out = x.data.reshape(shape).copy()

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad.reshape(x.shape)

    return _result("reshape", (x,), out, bwd)


def scale_rows(x: Tensor, col: Tensor) -> Tensor:
    """Scale each row of a matrix by a per-row coefficient (B or Bx1).

    Relevance propagation treats the column as a gate and the matrix as
    the signal.
    """
    if x.data.ndim != 2 or col.shape not in ((x.shape[0],), (x.shape[0], 1)):
        raise _shape_err("scale_rows", x, col)
    c = col.data.reshape(-1, 1)
    out = x.data * c

    def bwd(o):
        g = o.grad
        if x.grad is not None:
            x.grad += g * c
        if col.grad is not None:
            col.grad += (g * x.data).sum(axis=1).reshape(col.shape)

    return _result("scale_rows", (x, col), out, bwd)


def smul(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad * c

    return _result("smul", (x,), x.data * c, bwd)


def sadd(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(o):
        if x.grad is not None:
            x.grad += o.grad

    return _result("sadd", (x,), x.data + c, bwd)


def ssub(c: float, x: Tensor) -> Tensor:
    """c - x, mainly for the (1 - z) gate complement."""
    c = float(c)

    def bwd(o):
        if x.grad is not None:
            x.grad -= o.grad

    return _result("ssub", (x,), c - x.data, bwd)


# ---------------------------------------------------------------------------
# gradient utilities


def clip_global_norm(grads: Sequence, max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most
    ``max_norm``; returns the pre-clip norm.

    Accepts Tensors (their ``data`` holds the gradient values) or plain
    arrays. A non-finite entry makes the returned norm non-finite and no
    scaling is applied; the optimizer layer decides what to do then.
    """
    if max_norm <= 0:
        raise ValueError("clip_global_norm: max_norm must be positive")
    arrays = [g.data if isinstance(g, Tensor) else g for g in grads]
    if not arrays:
        return 0.0
    total = 0.0
    for a in arrays:
        total += float(np.sum(a * a))
    norm = float(np.sqrt(total))
    if not np.isfinite(norm):
        return norm
    if norm > max_norm:
        scale = max_norm / norm
        for a in arrays:
            a *= scale
    return norm


_FORWARD_OPS = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "softmax_rows": softmax_rows,
    "concat": concat,
    "slice": slice_axis,
    "sum": tsum,
    "mean": tmean,
    "lookup_rows": lookup_rows,
    "log": log,
    "exp": exp,
    "maximum_pairwise": maximum_pairwise,
}


def forward_op(op: str, inputs: Sequence[Tensor], **kwargs) -> Tensor:
    """Dispatch a primitive by name.

    Variadic primitives take their inputs as the list; ``concat`` takes
    the whole list, ``slice`` takes axis/start/stop keywords, and
    ``lookup_rows`` takes an ``ids`` keyword.
    """
    try:
        fn = _FORWARD_OPS[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}") from None
    if op == "concat":
        return fn(inputs, **kwargs)
    return fn(*inputs, **kwargs)
