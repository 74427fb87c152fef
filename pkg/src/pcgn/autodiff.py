"""Dense tensors with tape-based reverse-mode automatic differentiation.

Every model computation in this package is assembled from the primitives in
this module.  A :class:`Tensor` wraps a contiguous row-major numpy array.
When an operand is attached to a :class:`Tape`, the primitive records the
application (op name, input node ids, output node id, and a backward closure
over the cached forward values) so :func:`backprop` can replay the tape in
reverse.  Tensors without a tape attachment are plain values; the same
primitives then run without recording, which keeps decoding and evaluation
allocation-light.

Precision is a process-wide switch: float64 by default (required by the
gradient checks), float32 available for faster training runs.  With finite
checks enabled (the default), any NaN or infinity surfacing in a tensor
raises immediately instead of propagating.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "GradientSet",
    "ShapeError",
    "NonFiniteError",
    "set_precision",
    "precision",
    "set_finite_checks",
    "finite_checks_enabled",
    "tensor",
    "zeros",
    "ones",
    "matmul",
    "matvec",
    "transpose",
    "add",
    "scale",
    "hadamard",
    "sigmoid",
    "tanh",
    "map_activation",
    "softmax",
    "log_softmax",
    "concat",
    "stack_rows",
    "vslice",
    "embedding_lookup",
    "pick",
    "dot",
    "sum_all",
    "backprop",
    "finite_difference_check",
]

_PRECISIONS = {"double": np.float64, "single": np.float32}
_dtype = np.float64
_check_finite = True


class ShapeError(ValueError):
    """Operand shapes do not satisfy a primitive's contract."""


class NonFiniteError(ArithmeticError):
    """A NaN or infinity appeared while finite checks are enabled."""


def set_precision(name: str) -> None:
    """Select the process-wide element type: "double" or "single"."""
    global _dtype
    if name not in _PRECISIONS:
        raise ValueError(f"unknown precision {name!r}; expected one of {sorted(_PRECISIONS)}")
    _dtype = _PRECISIONS[name]


def precision() -> str:
    return "double" if _dtype is np.float64 else "single"


def set_finite_checks(enabled: bool) -> None:
    """Toggle NaN/Inf detection on tensor construction and op outputs."""
    global _check_finite
    _check_finite = bool(enabled)


def finite_checks_enabled() -> bool:
    return _check_finite


class Tensor:
    """Immutable-by-convention dense value; may reference a tape node.

    The wrapped array is shared, not copied: treat it as read-only once the
    tensor exists.  ``tape``/``node`` are set only by :meth:`Tape.watch` and
    by recorded primitives.
    """

    __slots__ = ("array", "tape", "node")

    def __init__(self, values, tape: "Tape | None" = None, node: int | None = None):
        arr = np.ascontiguousarray(values, dtype=_dtype)
        if _check_finite and not np.isfinite(arr).all():
            raise NonFiniteError(f"non-finite values in tensor of shape {arr.shape}")
        self.array = arr
        self.tape = tape
        self.node = node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Row-major flat view of the elements."""
        return self.array.reshape(-1)

    def item(self) -> float:
        if self.array.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.array.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = "" if self.node is None else f", node={self.node}"
        return f"Tensor(shape={self.shape}{tag})"


def _wrap(arr: np.ndarray, tape: "Tape | None" = None, node: int | None = None) -> Tensor:
    # Fast path for op outputs: dtype/contiguity already correct.
    if _check_finite and not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values in tensor of shape {arr.shape}")
    t = Tensor.__new__(Tensor)
    t.array = arr
    t.tape = tape
    t.node = node
    return t


def tensor(values) -> Tensor:
    return Tensor(values)


def zeros(shape) -> Tensor:
    return _wrap(np.zeros(shape, dtype=_dtype))


def ones(shape) -> Tensor:
    return _wrap(np.ones(shape, dtype=_dtype))


class Tape:
    """Append-only record of primitive applications.

    Entries are (op name, input node ids, output node id, backward closure)
    and are topologically ordered by construction: an entry's inputs always
    have smaller ids than its output.
    """

    __slots__ = ("_entries", "_count", "_leaf_shapes")

    def __init__(self):
        self._entries: list[tuple[str, tuple[int | None, ...], int, Callable]] = []
        self._count = 0
        self._leaf_shapes: dict[int, tuple[int, ...]] = {}

    def watch(self, value: Tensor) -> Tensor:
        """Register a differentiation leaf; returns the attached tensor."""
        if value.tape is not None:
            raise ValueError("tensor is already attached to a tape")
        nid = self._count
        self._count += 1
        self._leaf_shapes[nid] = value.array.shape
        return _wrap(value.array, self, nid)

    def _record(self, name: str, in_nodes: tuple, out: np.ndarray, backward: Callable) -> Tensor:
        nid = self._count
        self._count += 1
        self._entries.append((name, in_nodes, nid, backward))
        return _wrap(out, self, nid)

    @property
    def entries(self) -> list[tuple[str, tuple[int | None, ...], int]]:
        """(op, input ids, output id) triples, in application order."""
        return [(name, ins, out) for name, ins, out, _ in self._entries]

    @property
    def leaves(self) -> tuple[int, ...]:
        return tuple(self._leaf_shapes)

    def __len__(self) -> int:
        return len(self._entries)


class GradientSet:
    """Gradients of one scalar w.r.t. every watched leaf of a tape.

    Indexed by leaf tensor (or raw node id); leaves the output does not
    reach hold zeros of the leaf's shape.
    """

    def __init__(self, grads: dict[int, Tensor]):
        self._grads = grads

    def __getitem__(self, key: "Tensor | int") -> Tensor:
        nid = key.node if isinstance(key, Tensor) else key
        if nid not in self._grads:
            raise KeyError(f"node {nid} is not a watched leaf")
        return self._grads[nid]

    def __contains__(self, key: "Tensor | int") -> bool:
        nid = key.node if isinstance(key, Tensor) else key
        return nid in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def items(self):
        return self._grads.items()


def _tape_of(*operands: Tensor) -> "Tape | None":
    tape = None
    for t in operands:
        tp = t.tape
        if tp is not None:
            if tape is None:
                tape = tp
            elif tape is not tp:
                raise ValueError("operands belong to different tapes")
    return tape


# ---------------------------------------------------------------------------
# Primitives.  Each validates shapes, computes the forward value, and (when a
# tape is involved) records a backward closure returning one gradient array
# per input, aligned positionally; None marks inputs that need no gradient.
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.array, b.array
    if av.ndim != 2 or bv.ndim != 2:
        raise ShapeError(f"matmul expects two matrices, got shapes {av.shape} and {bv.shape}")
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {av.shape} x {bv.shape}")
    tape = _tape_of(a, b)
    out = av @ bv
    if tape is None:
        return _wrap(out)
    na, nb = a.node, b.node

    def backward(g):
        return (
            g @ bv.T if na is not None else None,
            av.T @ g if nb is not None else None,
        )

    return tape._record("matmul", (na, nb), out, backward)


def matvec(w: Tensor, x: Tensor) -> Tensor:
    wv, xv = w.array, x.array
    if wv.ndim != 2 or xv.ndim != 1:
        raise ShapeError(f"matvec expects a matrix and a vector, got shapes {wv.shape} and {xv.shape}")
    if wv.shape[1] != xv.shape[0]:
        raise ShapeError(f"matvec extents differ: {wv.shape} x {xv.shape}")
    tape = _tape_of(w, x)
    out = wv @ xv
    if tape is None:
        return _wrap(out)
    nw, nx = w.node, x.node

    def backward(g):
        return (
            np.outer(g, xv) if nw is not None else None,
            wv.T @ g if nx is not None else None,
        )

    return tape._record("matvec", (nw, nx), out, backward)


def transpose(a: Tensor) -> Tensor:
    av = a.array
    if av.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {av.shape}")
    tape = _tape_of(a)
    out = np.ascontiguousarray(av.T)
    if tape is None:
        return _wrap(out)

    def backward(g):
        return (np.ascontiguousarray(g.T),)

    return tape._record("transpose", (a.node,), out, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.array, b.array
    if av.shape != bv.shape:
        raise ShapeError(f"add expects equal shapes, got {av.shape} and {bv.shape}")
    tape = _tape_of(a, b)
    out = av + bv
    if tape is None:
        return _wrap(out)
    na, nb = a.node, b.node

    def backward(g):
        return (g if na is not None else None, g if nb is not None else None)

    return tape._record("add", (na, nb), out, backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    tape = _tape_of(a)
    out = a.array * c
    if tape is None:
        return _wrap(out)

    def backward(g):
        return (g * c,)

    return tape._record("scale", (a.node,), out, backward)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.array, b.array
    if av.shape != bv.shape:
        raise ShapeError(f"hadamard expects equal shapes, got {av.shape} and {bv.shape}")
    tape = _tape_of(a, b)
    out = av * bv
    if tape is None:
        return _wrap(out)
    na, nb = a.node, b.node

    def backward(g):
        return (g * bv if na is not None else None, g * av if nb is not None else None)

    return tape._record("hadamard", (na, nb), out, backward)


def sigmoid(x: Tensor) -> Tensor:
    # exp overflow below ~-745 flushes the result to exactly 0, which is the
    # correct limit; suppress the transient warning.
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-x.array))
    tape = _tape_of(x)
    if tape is None:
        return _wrap(out)

    def backward(g):
        return (g * out * (1.0 - out),)

    return tape._record("sigmoid", (x.node,), out, backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.array)
    tape = _tape_of(x)
    if tape is None:
        return _wrap(out)

    def backward(g):
        return (g * (1.0 - out * out),)

    return tape._record("tanh", (x.node,), out, backward)


def map_activation(kind: str, x: Tensor) -> Tensor:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    raise ValueError(f"unknown activation kind {kind!r}; expected 'sigmoid' or 'tanh'")


def softmax(x: Tensor) -> Tensor:
    v = x.array
    if v.ndim != 1:
        raise ShapeError(f"softmax expects a vector, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    e = np.exp(v - v.max())
    out = e / e.sum()
    tape = _tape_of(x)
    if tape is None:
        return _wrap(out)

    def backward(g):
        return (out * (g - np.dot(g, out)),)

    return tape._record("softmax", (x.node,), out, backward)


def log_softmax(x: Tensor) -> Tensor:
    v = x.array
    if v.ndim != 1:
        raise ShapeError(f"log_softmax expects a vector, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("log_softmax of an empty vector is undefined")
    m = v.max()
    shifted = v - m
    lse = np.log(np.sum(np.exp(shifted)))
    out = shifted - lse
    tape = _tape_of(x)
    if tape is None:
        return _wrap(out)

    def backward(g):
        return (g - np.exp(out) * g.sum(),)

    return tape._record("log_softmax", (x.node,), out, backward)


def concat(parts: Sequence[Tensor]) -> Tensor:
    if len(parts) == 0:
        raise ValueError("concat needs at least one part")
    for p in parts:
        if p.array.ndim != 1:
            raise ShapeError(f"concat expects vectors, got shape {p.array.shape}")
    tape = _tape_of(*parts)
    arrays = [p.array for p in parts]
    out = np.concatenate(arrays)
    if tape is None:
        return _wrap(out)
    nodes = tuple(p.node for p in parts)
    sizes = [a.size for a in arrays]

    def backward(g):
        grads = []
        off = 0
        for n, size in zip(nodes, sizes):
            grads.append(g[off : off + size] if n is not None else None)
            off += size
        return tuple(grads)

    return tape._record("concat", nodes, out, backward)


def stack_rows(parts: Sequence[Tensor]) -> Tensor:
    if len(parts) == 0:
        raise ValueError("stack_rows needs at least one row")
    width = parts[0].array.shape[0] if parts[0].array.ndim == 1 else None
    for p in parts:
        if p.array.ndim != 1 or p.array.shape[0] != width:
            raise ShapeError("stack_rows expects equal-length vectors")
    tape = _tape_of(*parts)
    out = np.stack([p.array for p in parts])
    if tape is None:
        return _wrap(out)
    nodes = tuple(p.node for p in parts)

    def backward(g):
        return tuple(g[i] if n is not None else None for i, n in enumerate(nodes))

    return tape._record("stack_rows", nodes, out, backward)


def vslice(x: Tensor, start: int, stop: int) -> Tensor:
    v = x.array
    if v.ndim != 1:
        raise ShapeError(f"vslice expects a vector, got shape {v.shape}")
    if not (0 <= start <= stop <= v.shape[0]):
        raise IndexError(f"slice [{start}:{stop}] out of range for length {v.shape[0]}")
    tape = _tape_of(x)
    out = v[start:stop]
    if tape is None:
        return _wrap(out)
    n = v.shape[0]

    def backward(g):
        full = np.zeros(n, dtype=v.dtype)
        full[start:stop] = g
        return (full,)

    return tape._record("vslice", (x.node,), out, backward)


def embedding_lookup(table: Tensor, index: int) -> Tensor:
    tv = table.array
    if tv.ndim != 2:
        raise ShapeError(f"embedding_lookup expects a matrix table, got shape {tv.shape}")
    index = int(index)
    if not (0 <= index < tv.shape[0]):
        raise IndexError(f"row {index} out of range for table with {tv.shape[0]} rows")
    tape = _tape_of(table)
    out = tv[index].copy()
    if tape is None:
        return _wrap(out)

    def backward(g):
        full = np.zeros_like(tv)
        full[index] = g
        return (full,)

    return tape._record("embedding_lookup", (table.node,), out, backward)


def pick(x: Tensor, index: int) -> Tensor:
    v = x.array
    if v.ndim != 1:
        raise ShapeError(f"pick expects a vector, got shape {v.shape}")
    index = int(index)
    if not (0 <= index < v.shape[0]):
        raise IndexError(f"element {index} out of range for length {v.shape[0]}")
    tape = _tape_of(x)
    out = np.asarray(v[index])
    if tape is None:
        return _wrap(out)
    n = v.shape[0]

    def backward(g):
        full = np.zeros(n, dtype=v.dtype)
        full[index] = g
        return (full,)

    return tape._record("pick", (x.node,), out, backward)


def dot(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.array, b.array
    if av.ndim != 1 or bv.ndim != 1 or av.shape != bv.shape:
        raise ShapeError(f"dot expects equal-length vectors, got {av.shape} and {bv.shape}")
    tape = _tape_of(a, b)
    out = np.asarray(np.dot(av, bv))
    if tape is None:
        return _wrap(out)
    na, nb = a.node, b.node

    def backward(g):
        return (g * bv if na is not None else None, g * av if nb is not None else None)

    return tape._record("dot", (na, nb), out, backward)


def sum_all(x: Tensor) -> Tensor:
    v = x.array
    tape = _tape_of(x)
    out = np.asarray(v.sum())
    if tape is None:
        return _wrap(out)

    def backward(g):
        return (g * np.ones_like(v),)

    return tape._record("sum_all", (x.node,), out, backward)


def backprop(tape: Tape, output: Tensor) -> GradientSet:
    """Reverse sweep from a scalar output to every watched leaf."""
    if output.tape is not tape or output.node is None:
        raise ValueError("output is not a node of this tape")
    if output.array.size != 1:
        raise ValueError(f"backprop requires a scalar output, got shape {output.shape}")
    acc: dict[int, np.ndarray] = {output.node: np.ones_like(output.array)}
    for _name, in_nodes, out_node, backward in reversed(tape._entries):
        g = acc.get(out_node)
        if g is None:
            continue
        for nid, ig in zip(in_nodes, backward(g)):
            if nid is None or ig is None:
                continue
            prev = acc.get(nid)
            acc[nid] = ig if prev is None else prev + ig
    leaf_grads: dict[int, Tensor] = {}
    for nid, shape in tape._leaf_shapes.items():
        g = acc.get(nid)
        if g is None:
            leaf_grads[nid] = zeros(shape)
        else:
            leaf_grads[nid] = _wrap(np.ascontiguousarray(g).reshape(shape))
    return GradientSet(leaf_grads)


def finite_difference_check(f: Callable[[Tensor], Tensor], theta: Tensor, eps: float = 1e-5) -> float:
    """Max relative gap between backprop and central finite differences.

    ``f`` must map a tensor to a scalar tensor using only primitives from
    this module.  It runs once under a tape for the analytic gradient and
    2n more times tape-free.  Relative error per coordinate is
    |a - n| / max(|a|, |n|, 1e-8).  Meaningful in double precision only.
    """
    tape = Tape()
    watched = tape.watch(theta)
    out = f(watched)
    if out.array.size != 1:
        raise ShapeError("finite_difference_check needs a scalar-valued function")
    analytic = backprop(tape, out)[watched].array.reshape(-1)

    probe = theta.array.copy()
    flat = probe.reshape(-1)
    base = flat.copy()
    numeric = np.empty(flat.size, dtype=np.float64)
    for i in range(flat.size):
        flat[i] = base[i] + eps
        up = float(f(_wrap(probe)).array)
        flat[i] = base[i] - eps
        down = float(f(_wrap(probe)).array)
        flat[i] = base[i]
        numeric[i] = (up - down) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if flat.size else 0.0
