"""Dense 2-D tensors with define-by-run reverse-mode differentiation.

Every value is a float64 matrix.  Vectors are carried as ``1 x k`` rows so
that a batch of vectors is simply a taller matrix.  A :class:`Tape` records
each primitive as it executes; :func:`backward` walks the record in reverse
insertion order and accumulates adjoints into the operands.

Tensors that are not attached to a tape are plain constants: ops on them run
the forward computation only, which is how evaluation avoids the bookkeeping
cost.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DegenerateInputError, DimensionError, NonFiniteError

DTYPE = np.float64
LOG_CLAMP = 1e-12


class Tensor:
    """A 2-D float64 array, optionally recorded on a :class:`Tape`."""

    __slots__ = ("value", "grad", "tape", "parents", "backward_fn", "name")

    def __init__(self, value, tape=None, parents=(), backward_fn=None, name=None):
        arr = np.asarray(value, dtype=DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got array of shape {arr.shape}")
        self.value = arr
        self.grad = None
        self.tape = tape
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def values(self) -> list[float]:
        """Row-major flat copy of the entries."""
        return self.value.ravel().tolist()

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor({self.rows}x{self.cols}{tag})"

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(value) -> Tensor:
    """Wrap an array as an untracked tensor."""
    return Tensor(value)


def zeros(rows: int, cols: int) -> Tensor:
    return Tensor(np.zeros((rows, cols), dtype=DTYPE))


class Tape:
    """Insertion-ordered record of primitive ops.

    Nodes are appended as they are created, so insertion order is already a
    topological order of the graph.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.leaves: dict[str, Tensor] = {}

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value, name: str | None = None) -> Tensor:
        t = Tensor(value, tape=self, name=name)
        t.value = t.value.copy()
        self.nodes.append(t)
        if name is not None:
            if name in self.leaves:
                raise ContractError(f"duplicate leaf name {name!r}")
            self.leaves[name] = t
        return t

    def leaves_from(self, arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
        return {name: self.leaf(arr, name) for name, arr in arrays.items()}

    def reset(self):
        """Clear all adjoints so backward() can run again."""
        for node in self.nodes:
            node.grad = None


def _record(value: np.ndarray, parents: tuple, backward_fn: Callable) -> Tensor:
    tape = None
    for p in parents:
        if p.tape is not None:
            if tape is None:
                tape = p.tape
            elif p.tape is not tape:
                raise ContractError("operands belong to different tapes")
    if tape is None:
        return Tensor(value)
    out = Tensor(value, tape=tape, parents=parents, backward_fn=backward_fn)
    tape.nodes.append(out)
    return out


def backward(tape: Tape, root: Tensor) -> dict[str, np.ndarray]:
    """Propagate adjoints from a scalar ``root`` back through ``tape``.

    Returns the adjoint of every named leaf.  Nodes that do not influence the
    root end up with a zero adjoint of their own shape.
    """
    if root.shape != (1, 1):
        raise ContractError(f"backward() needs a scalar (1x1) root, got {root.shape}")
    if root.tape is not tape:
        raise ContractError("root was not recorded on this tape")
    tape.reset()
    root.grad = np.ones((1, 1), dtype=DTYPE)
    for node in reversed(tape.nodes):
        g = node.grad
        if g is None or node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or parent.tape is None:
                continue
            parent.grad = pg if parent.grad is None else parent.grad + pg
    for node in tape.nodes:
        if node.grad is None:
            node.grad = np.zeros_like(node.value)
    return {name: leaf.grad for name, leaf in tape.leaves.items()}


# ---------------------------------------------------------------------------
# shape helpers


def _broadcast_ok(a: tuple, b: tuple) -> bool:
    return all(x == y or x == 1 or y == 1 for x, y in zip(a, b))


def _check_binary(a: Tensor, b: Tensor, op: str):
    if a.shape == b.shape:
        return
    # row-vector / column-vector / scalar broadcasting only
    if not _broadcast_ok(a.shape, b.shape):
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard matrix product ``a @ b``."""
    if a.cols != b.rows:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value

    def back(g):
        return g @ bv.T, av.T @ g

    return _record(_product(av, bv), (a, b), back)


def _product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # BLAS kernels round tail rows of a block differently from the rest, so
    # identical input rows can come out different in the last bit.  einsum's
    # own loop treats every row alike, which keeps repeated inputs bit-identical.
    return np.einsum("ik,kj->ij", a, b)


def linear(x: Tensor, w: Tensor) -> Tensor:
    """Apply ``w`` (out x in) to every row of ``x``: ``x @ w.T``.

    This is the same product as ``matmul(w, x.T).T`` and is counted as one
    matrix multiplication.
    """
    if x.cols != w.cols:
        raise DimensionError(f"linear: rows of width {x.cols} do not fit weight {w.shape}")
    xv, wv = x.value, w.value

    def back(g):
        return g @ wv, g.T @ xv

    return _record(_product(xv, wv.T), (x, w), back)


def transpose(x: Tensor) -> Tensor:
    return _record(x.value.T.copy(), (x,), lambda g: (g.T,))


def reshape(x: Tensor, rows: int, cols: int) -> Tensor:
    if rows * cols != x.value.size:
        raise DimensionError(f"reshape: cannot view {x.shape} as ({rows}, {cols})")
    shape = x.shape
    return _record(x.value.reshape(rows, cols), (x,), lambda g: (g.reshape(shape),))


# ---------------------------------------------------------------------------
# elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary(a, b, "add")
    sa, sb = a.shape, b.shape
    return _record(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _record(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_binary(a, b, "mul")
    av, bv = a.value, b.value

    def back(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _record(av * bv, (a, b), back)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _record(x.value * c, (x,), lambda g: (g * c,))


def one_minus(x: Tensor) -> Tensor:
    return _record(1.0 - x.value, (x,), lambda g: (-g,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.value)
    return _record(y, (x,), lambda g: (g * (1.0 - y * y),))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.value)
    return _record(y, (x,), lambda g: (g * y * (1.0 - y),))


_ELEMENTWISE = {
    "tanh": tanh,
    "sigmoid": sigmoid,
    "mul": mul,
    "add": add,
    "sub": sub,
    "scale": scale,
}


def elementwise(op: str, *args) -> Tensor:
    """Dispatch one of ``tanh, sigmoid, mul, add, sub, scale`` by name."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ContractError(f"unknown elementwise op {op!r}; expected one of {sorted(_ELEMENTWISE)}")
    args = tuple(_as_tensor(a) if not (op == "scale" and i == 1) else a for i, a in enumerate(args))
    return fn(*args)


def select(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Row-wise choice: rows where ``mask`` is true come from ``a``, others from ``b``.

    ``mask`` is a boolean column (rows x 1) treated as a constant.
    """
    if a.shape != b.shape:
        raise DimensionError(f"select: shapes differ {a.shape} vs {b.shape}")
    m = np.asarray(mask, dtype=bool).reshape(-1, 1)
    if m.shape[0] != a.rows:
        raise DimensionError(f"select: mask of length {m.shape[0]} for {a.rows} rows")

    def back(g):
        return np.where(m, g, 0.0), np.where(m, 0.0, g)

    return _record(np.where(m, a.value, b.value), (a, b), back)


# ---------------------------------------------------------------------------
# structural


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = parts[0].rows
    for p in parts:
        if p.rows != rows:
            raise DimensionError(f"concat_cols: row counts differ {[q.shape for q in parts]}")
    edges = np.cumsum([0] + [p.cols for p in parts])

    def back(g):
        return tuple(g[:, edges[k]:edges[k + 1]] for k in range(len(parts)))

    return _record(np.concatenate([p.value for p in parts], axis=1), tuple(parts), back)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    cols = parts[0].cols
    for p in parts:
        if p.cols != cols:
            raise DimensionError(f"concat_rows: column counts differ {[q.shape for q in parts]}")
    edges = np.cumsum([0] + [p.rows for p in parts])

    def back(g):
        return tuple(g[edges[k]:edges[k + 1]] for k in range(len(parts)))

    return _record(np.concatenate([p.value for p in parts], axis=0), tuple(parts), back)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= x.rows:
        raise DimensionError(f"slice_rows: [{start}, {stop}) out of range for {x.shape}")
    shape = x.shape

    def back(g):
        full = np.zeros(shape, dtype=DTYPE)
        full[start:stop] = g
        return (full,)

    return _record(x.value[start:stop], (x,), back)


def take_rows(x: Tensor, index) -> Tensor:
    """Gather rows by integer index (embedding lookup); adjoint scatter-adds."""
    idx = np.asarray(index, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= x.rows):
        raise DimensionError(f"take_rows: index out of range for {x.shape}")
    shape = x.shape

    def back(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, idx, g)
        return (full,)

    return _record(x.value[idx], (x,), back)


def tile_rows(x: Tensor, times: int) -> Tensor:
    """Stack ``times`` copies of ``x`` vertically."""
    r, c = x.shape
    return _record(np.tile(x.value, (times, 1)), (x,), lambda g: (g.reshape(times, r, c).sum(axis=0),))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _record(np.array([[x.value.sum()]]), (x,), lambda g: (np.full(shape, g[0, 0]),))


def pool_time(stacked: Tensor, weights: Tensor) -> Tensor:
    """Weighted sum over time of a time-major stack.

    ``stacked`` holds T blocks of R rows (row ``t*R + r``); ``weights`` is
    R x T.  Row r of the result is ``sum_t weights[r, t] * stacked[t*R + r]``.
    """
    R, T = weights.shape
    if stacked.rows != R * T:
        raise DimensionError(f"pool_time: stack {stacked.shape} does not hold {T} blocks of {R} rows")
    k = stacked.cols
    h = stacked.value.reshape(T, R, k)
    w = weights.value
    out = np.einsum("rt,trk->rk", w, h)

    def back(g):
        gh = w.T[:, :, None] * g[None, :, :]
        gw = np.einsum("trk,rk->rt", h, g)
        return gh.reshape(R * T, k), gw

    return _record(out, (stacked, weights), back)


# ---------------------------------------------------------------------------
# normalisation and loss


def softmax_masked(logits: Tensor, mask=None, allow_empty: bool = False) -> Tensor:
    """Row-wise softmax over the positions where ``mask`` is set.

    Masked positions come out as exact zeros.  A row with no unmasked entry is
    a degenerate input unless ``allow_empty`` is given, in which case that row
    is all zeros (used for padding rows of a batch).
    """
    z = logits.value
    if mask is None:
        m = np.ones(z.shape, dtype=bool)
    else:
        m = np.asarray(mask, dtype=bool)
        if m.ndim == 1:
            m = m.reshape(1, -1)
        if m.shape != z.shape:
            raise DimensionError(f"softmax_masked: mask {m.shape} vs logits {z.shape}")
    live = m.any(axis=1)
    if not allow_empty and not live.all():
        raise DegenerateInputError("softmax_masked: a row has no unmasked entry")
    shifted = np.where(m, z, -np.inf)
    top = shifted.max(axis=1, keepdims=True)
    top[~live] = 0.0
    e = np.exp(shifted - top)
    total = e.sum(axis=1, keepdims=True)
    total[~live] = 1.0
    p = e / total

    def back(g):
        return (p * (g - (p * g).sum(axis=1, keepdims=True)),)

    return _record(p, (logits,), back)


def softmax(logits: Tensor) -> Tensor:
    return softmax_masked(logits)


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean over rows of ``-ln max(p[label], 1e-12)`` as a 1x1 tensor."""
    lab = np.asarray(labels, dtype=np.intp).ravel()
    n, k = probs.shape
    if lab.shape[0] != n:
        raise DimensionError(f"cross_entropy: {lab.shape[0]} labels for {n} rows")
    if lab.size and (lab.min() < 0 or lab.max() >= k):
        raise ContractError(f"cross_entropy: labels must lie in [0, {k})")
    rows = np.arange(n)
    picked = probs.value[rows, lab]
    clamped = np.maximum(picked, LOG_CLAMP)
    loss = -np.log(clamped).mean()

    def back(g):
        full = np.zeros((n, k), dtype=DTYPE)
        live = picked > LOG_CLAMP
        full[rows[live], lab[live]] = -g[0, 0] / (n * picked[live])
        return (full,)

    return _record(np.array([[loss]]), (probs,), back)


# ---------------------------------------------------------------------------
# randomness


class SeededRng:
    """Deterministic random stream addressed by ``(seed, stream key)``.

    Substreams are derived with :meth:`substream` from string or integer keys;
    distinct keys give statistically independent, reproducible streams.
    """

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        if seed < 0:
            raise ContractError("seed must be nonnegative")
        self.seed = int(seed)
        self.stream = tuple(stream)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    @staticmethod
    def key(name: str | int) -> int:
        if isinstance(name, int):
            return name
        return zlib.crc32(name.encode("utf-8"))

    def substream(self, *names: str | int) -> "SeededRng":
        return SeededRng(self.seed, self.stream + tuple(self.key(n) for n in names))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def random(self, shape=None):
        return self._gen.random(size=shape)

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(size=shape)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def shuffle(self, items: list) -> list:
        order = self._gen.permutation(len(items))
        return [items[i] for i in order]

    def choice(self, a, size=None, replace: bool = True):
        return self._gen.choice(a, size=size, replace=replace)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckResult:
    max_error: float
    per_param: dict[str, float] = field(default_factory=dict)

    def worst(self) -> tuple[str, float]:
        name = max(self.per_param, key=self.per_param.get)
        return name, self.per_param[name]


def grad_check(
    f: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, np.ndarray],
    eps: float = 1e-5,
) -> GradCheckResult:
    """Compare tape adjoints of ``f`` against central finite differences.

    ``f`` maps a dict of tensors to a 1x1 tensor.  The error for one
    coordinate is ``|a - n| / max(1, |a| + |n|)``; the result reports the
    maximum over all coordinates, overall and per parameter.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ContractError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    tape = Tape()
    leaves = tape.leaves_from(params)
    root = f(leaves)
    analytic = backward(tape, root)

    work = {k: np.array(v, dtype=DTYPE, copy=True) for k, v in params.items()}
    consts = {k: Tensor(v) for k, v in work.items()}

    def evaluate(name):
        value = f(consts).item()
        if not math.isfinite(value):
            raise NonFiniteError(f"non-finite objective while perturbing {name!r}", name=name)
        return value

    result = GradCheckResult(0.0)
    for name, arr in work.items():
        if not np.all(np.isfinite(analytic[name])):
            raise NonFiniteError(f"non-finite analytic gradient for {name!r}", name=name)
        worst = 0.0
        flat = arr.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = evaluate(name)
            flat[i] = orig - eps
            down = evaluate(name)
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            err = abs(ga[i] - numeric) / max(1.0, abs(ga[i]) + abs(numeric))
            worst = max(worst, err)
        result.per_param[name] = worst
        result.max_error = max(result.max_error, worst)
    return result
