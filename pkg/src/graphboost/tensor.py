"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is deliberately small: exactly what one-layer neighborhood
encoders, the pairwise/node decoders and their weighted losses need.
Values are always float64 (gradient checks need the precision, and at
desk scale memory is irrelevant).  Operations are recorded on an explicit
``Tape``; independent training runs never share mutable state.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "parameter",
    "constant",
    "forward_op",
    "backward",
    "zero_grad",
    "matmul",
    "add",
    "elementwise_mul",
    "concat_columns",
    "row_mean",
    "reduce_sum",
    "sigmoid",
    "exp",
    "log",
    "leaky_relu",
    "softmax_rows",
    "reshape",
    "clip",
    "scale",
    "segment_sum",
    "segment_mean",
    "repeat_rows",
    "slice_rows",
    "segment_max_values",
    "LEAKY_SLOPE",
    "PROB_FLOOR",
]

# Fixed leaky_relu slope; conventional choice for additive attention scores.
LEAKY_SLOPE = 0.2

# Probabilities fed to log in losses and weight updates are clamped to
# [PROB_FLOOR, 1 - PROB_FLOOR] so y*log(s) never diverges.
PROB_FLOOR = 1e-12


class Tensor:
    """A dense float64 array, optionally carrying a gradient.

    ``requires_grad`` marks trainable leaves (parameters).  Tensors
    produced by recorded ops remember the tape they live on; everything
    else (data, constants) is tape-free and safe to share across threads.
    """

    __slots__ = ("values", "grad", "requires_grad", "tape")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        self.values: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.tape: Optional["Tape"] = None

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def __repr__(self) -> str:
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag})"


def parameter(values) -> Tensor:
    """A trainable leaf tensor."""
    return Tensor(values, requires_grad=True)


def constant(values) -> Tensor:
    """A non-trainable tensor (data, masks, aggregation matrices)."""
    return Tensor(values)


class _Node:
    """One recorded operation: output, inputs, and the local vjp."""

    __slots__ = ("output", "inputs", "vjp")

    def __init__(self, output: Tensor, inputs: Sequence[Tensor], vjp: Callable):
        self.output = output
        self.inputs = tuple(inputs)
        self.vjp = vjp


# Stack of active tapes (inner-most last).  Tapes are single-threaded by
# contract; parallel runs each open their own tape.
_TAPE_STACK: list["Tape"] = []


class Tape:
    """Append-only record of operations, consumed by a single backward pass."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self, "tapes must be exited in LIFO order"

    def __len__(self) -> int:
        return len(self._nodes)


def _record(values: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    """Wrap a forward result; record it if a tape is active and any input is tracked."""
    out = Tensor(values)
    if _TAPE_STACK:
        tape = _TAPE_STACK[-1]
        if any(t.requires_grad or t.tape is tape for t in inputs):
            out.tape = tape
            tape._nodes.append(_Node(out, inputs, vjp))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes that were broadcast in the forward op."""
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum())
    # Leading axes that exist in grad but not in the input shape.
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(kind: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{kind}: shapes {a.shape} and {b.shape} do not conform") from None


# ---------------------------------------------------------------------------
# Forward ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    av, bv = a.values, b.values

    def vjp(g):
        return (g @ bv.T, av.T @ g)

    return _record(av @ bv, (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    a_shape, b_shape = a.shape, b.shape

    def vjp(g):
        return (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape))

    return _record(a.values + b.values, (a, b), vjp)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("elementwise_mul", a, b)
    av, bv = a.values, b.values

    def vjp(g):
        return (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape))

    return _record(av * bv, (a, b), vjp)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar (sugar over elementwise_mul with a constant)."""
    return elementwise_mul(a, constant(float(c)))


def concat_columns(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ValueError("concat_columns: needs at least one input")
    rows = tensors[0].shape[0] if tensors[0].values.ndim == 2 else None
    for t in tensors:
        if t.values.ndim != 2 or t.shape[0] != rows:
            raise ValueError(
                "concat_columns: inputs must be 2-D with equal row counts, got "
                + ", ".join(str(t.shape) for t in tensors)
            )
    widths = [t.shape[1] for t in tensors]
    offsets = np.cumsum([0] + widths)

    def vjp(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(widths)))

    return _record(np.concatenate([t.values for t in tensors], axis=1), tensors, vjp)


def row_mean(a: Tensor) -> Tensor:
    """Mean over rows of a 2-D tensor, keeping a single output row."""
    if a.values.ndim != 2:
        raise ValueError(f"row_mean: input must be 2-D, got shape {a.shape}")
    m = a.shape[0]

    def vjp(g):
        return (np.broadcast_to(g / m, a.shape),)

    return _record(a.values.mean(axis=0, keepdims=True), (a,), vjp)


def reduce_sum(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    shape = a.shape

    def vjp(g):
        return (np.broadcast_to(g, shape),)

    return _record(np.asarray(a.values.sum()), (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _record(out, (a,), vjp)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.values)

    def vjp(g):
        return (g * out,)

    return _record(out, (a,), vjp)


def log(a: Tensor) -> Tensor:
    x = a.values
    if np.any(x <= 0.0):
        raise ValueError(
            "log: input contains non-positive values; clamp probabilities first (see clip)"
        )

    def vjp(g):
        return (g / x,)

    return _record(np.log(x), (a,), vjp)


def leaky_relu(a: Tensor) -> Tensor:
    x = a.values
    mask = x >= 0.0

    def vjp(g):
        return (g * np.where(mask, 1.0, LEAKY_SLOPE),)

    return _record(np.where(mask, x, LEAKY_SLOPE * x), (a,), vjp)


def softmax_rows(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise ValueError(f"softmax_rows: input must be 2-D, got shape {a.shape}")
    x = a.values
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return _record(out, (a,), vjp)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    old = a.shape

    def vjp(g):
        return (g.reshape(old),)

    return _record(a.values.reshape(shape), (a,), vjp)


def clip(a: Tensor, lo: float = PROB_FLOOR, hi: float = 1.0 - PROB_FLOOR) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes through only where unclamped."""
    x = a.values
    mask = (x >= lo) & (x <= hi)

    def vjp(g):
        return (g * mask,)

    return _record(np.clip(x, lo, hi), (a,), vjp)


def _segment_bounds(lengths) -> tuple:
    lengths = np.asarray(lengths, dtype=np.int64)
    ends = np.cumsum(lengths)
    starts = ends - lengths
    return lengths, starts, ends


def _segment_reduce(arr: np.ndarray, starts: np.ndarray, lengths: np.ndarray, ufunc) -> np.ndarray:
    """Per-block ufunc.reduceat with exact handling of empty blocks.

    reduceat cannot take a start index equal to the array length (which
    trailing empty blocks produce), so the reduction runs over in-bounds
    starts only; empty blocks are zeroed afterwards.
    """
    out = np.zeros((lengths.size,) + arr.shape[1:])
    valid = starts < arr.shape[0]
    if arr.shape[0] and valid.any():
        out[valid] = ufunc.reduceat(arr, starts[valid], axis=0)
    out[lengths == 0] = 0.0
    return out


def segment_sum(a: Tensor, lengths) -> Tensor:
    """Sum contiguous row blocks of a flat (T, d) tensor into (B, d) rows.

    Zero-length blocks yield zero rows.
    """
    lengths, starts, _ = _segment_bounds(lengths)
    if a.values.ndim != 2 or int(lengths.sum()) != a.shape[0]:
        raise ValueError(
            f"segment_sum: lengths (total {int(lengths.sum())}) do not cover shape {a.shape}")
    out = _segment_reduce(a.values, starts, lengths, np.add)

    def vjp(g):
        return (np.repeat(g, lengths, axis=0),)

    return _record(out, (a,), vjp)


def segment_mean(a: Tensor, lengths) -> Tensor:
    """Mean of contiguous row blocks; zero-length blocks yield zero rows."""
    lengths, _, _ = _segment_bounds(lengths)
    total = segment_sum(a, lengths)
    inv = np.divide(1.0, lengths, out=np.zeros(lengths.size), where=lengths > 0)
    return elementwise_mul(total, constant(inv[:, None]))


def repeat_rows(a: Tensor, lengths) -> Tensor:
    """Repeat each row of a (B, d) tensor lengths[b] times, giving (T, d)."""
    lengths, starts, _ = _segment_bounds(lengths)
    if a.values.ndim != 2 or lengths.size != a.shape[0]:
        raise ValueError(f"repeat_rows: {lengths.size} lengths for shape {a.shape}")
    out = np.repeat(a.values, lengths, axis=0)

    def vjp(g):
        return (_segment_reduce(g, starts, lengths, np.add),)

    return _record(out, (a,), vjp)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous row slice [start, stop) of a 2-D tensor."""
    if a.values.ndim != 2 or not 0 <= start <= stop <= a.shape[0]:
        raise ValueError(f"slice_rows: invalid range [{start}, {stop}) for shape {a.shape}")
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        full[start:stop] = g
        return (full,)

    return _record(a.values[start:stop].copy(), (a,), vjp)


def segment_max_values(values: np.ndarray, lengths) -> np.ndarray:
    """Per-block max of a flat (T, 1) array, repeated back to (T, 1).

    Plain ndarray helper (not a tape op): used as a constant shift for the
    numerically stable per-block softmax, which leaves gradients untouched.
    """
    lengths, starts, _ = _segment_bounds(lengths)
    if values.shape[0] == 0:
        return np.zeros_like(values)
    maxes = _segment_reduce(values, starts, lengths, np.maximum)
    return np.repeat(maxes, lengths, axis=0)


_UNARY = {
    "row_mean": row_mean,
    "reduce_sum": reduce_sum,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
    "leaky_relu": leaky_relu,
    "softmax_rows": softmax_rows,
}
_BINARY = {
    "matmul": matmul,
    "add": add,
    "elementwise_mul": elementwise_mul,
}

OP_KINDS = tuple(sorted(_UNARY) + sorted(_BINARY) + ["concat_columns"])


def forward_op(kind: str, inputs: Sequence[Tensor]) -> Tensor:
    """Dispatch a forward op by name; records on the active tape when tracked."""
    if kind in _BINARY:
        if len(inputs) != 2:
            raise ValueError(f"{kind}: expected 2 inputs, got {len(inputs)}")
        return _BINARY[kind](inputs[0], inputs[1])
    if kind in _UNARY:
        if len(inputs) != 1:
            raise ValueError(f"{kind}: expected 1 input, got {len(inputs)}")
        return _UNARY[kind](inputs[0])
    if kind == "concat_columns":
        return concat_columns(inputs)
    raise ValueError(f"unknown op kind {kind!r}; valid kinds: {', '.join(OP_KINDS)}")


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

def backward(output: Tensor, tape: Tape) -> None:
    """Populate ``grad`` on every parameter reachable from ``output``.

    The tape is consumed: a second backward on it is rejected.  Gradients
    accumulate into existing ``grad`` arrays (call :func:`zero_grad`
    between batches).
    """
    if tape.consumed:
        raise ValueError("backward: tape already consumed")
    if output.tape is not tape:
        raise ValueError("backward: output was not produced on this tape")
    if output.values.size != 1:
        raise ValueError(f"backward: output must be scalar, got shape {output.shape}")
    tape.consumed = True

    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.values)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape._nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        partials = node.vjp(g)
        for t, gi in zip(node.inputs, partials):
            if gi is None:
                continue
            if t.requires_grad:
                leaves[id(t)] = t
            elif t.tape is not tape:
                continue
            prev = grads.get(id(t))
            grads[id(t)] = gi if prev is None else prev + gi
    for key, t in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        g = np.asarray(g, dtype=np.float64).reshape(t.shape)
        t.grad = g.copy() if t.grad is None else t.grad + g


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None
