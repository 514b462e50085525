"""Dense-matrix reverse-mode autodiff substrate.

Everything downstream (encoder, memory, attention, decoder, training) is
built from the primitives in this module.  Values are numpy float64 arrays
of rank 0, 1 or 2; each primitive computes its result eagerly and, when a
Tape is active, records a backward closure.  Replaying the tape in reverse
yields gradients of a scalar root with respect to every tensor that took
part in the computation.

Double precision is used throughout: central finite differences (the
reference every gradient is checked against) are unreliable in float32.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "NumericError",
    "ShapeError",
    "Tensor",
    "Tape",
    "ParamStore",
    "GradCheckReport",
    "recording",
    "set_finite_checks",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "transpose",
    "concat",
    "concat_cols",
    "stack_rows",
    "slice1d",
    "reshape",
    "take",
    "take_row",
    "take_rows",
    "gather_sum",
    "scale_rows",
    "rows_weighted_sum",
    "sum_all",
    "sigmoid",
    "tanh",
    "relu",
    "exp",
    "log",
    "softmax",
    "masked_softmax_rows",
    "dropout",
    "lstm_cell",
    "grad_check",
    "save_params",
    "load_params",
]


class NumericError(RuntimeError):
    """A non-finite value appeared where a finite one is required."""


class ShapeError(ValueError):
    """Operands with incompatible shapes."""


_finite_checks = True


def set_finite_checks(enabled: bool) -> None:
    """Toggle NaN/Inf detection at op boundaries (on by default)."""
    global _finite_checks
    _finite_checks = enabled


class Tensor:
    """A rank-0/1/2 float64 value with a gradient buffer."""

    __slots__ = ("value", "grad")

    def __init__(self, value) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        if self.value.ndim > 2:
            raise ShapeError(f"tensors are rank <= 2, got shape {self.value.shape}")
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of primitive ops; backward replays it in reverse."""

    __slots__ = ("_backs",)

    def __init__(self) -> None:
        self._backs: list[Callable[[], None]] = []

    def __len__(self) -> int:
        return len(self._backs)

    def record(self, back: Callable[[], None]) -> None:
        self._backs.append(back)

    def backward(self, root: Tensor) -> None:
        """Seed d(root)/d(root)=1 and accumulate gradients into inputs."""
        if root.value.ndim != 0:
            raise ValueError(f"backward requires a scalar root, got shape {root.value.shape}")
        root.grad = np.asarray(1.0)
        for back in reversed(self._backs):
            back()


_active_tapes: list[Tape] = []


@contextmanager
def recording(tape: Tape) -> Iterator[Tape]:
    """Record all primitives executed in this context onto `tape`."""
    _active_tapes.append(tape)
    try:
        yield tape
    finally:
        _active_tapes.pop()


def _out(value: np.ndarray, back: Callable[[Tensor], Callable[[], None]] | None, opname: str) -> Tensor:
    if _finite_checks and not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite value produced by {opname}")
    out = Tensor(value)
    if _active_tapes and back is not None:
        _active_tapes[-1].record(back(out))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    if shape == ():
        return grad.sum()
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    val = a.value + b.value

    def back(out: Tensor):
        def fn() -> None:
            a.grad += _unbroadcast(out.grad, a.value.shape)
            b.grad += _unbroadcast(out.grad, b.value.shape)
        return fn

    return _out(val, back, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    val = a.value - b.value

    def back(out: Tensor):
        def fn() -> None:
            a.grad += _unbroadcast(out.grad, a.value.shape)
            b.grad -= _unbroadcast(out.grad, b.value.shape)
        return fn

    return _out(val, back, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    val = a.value * b.value

    def back(out: Tensor):
        def fn() -> None:
            a.grad += _unbroadcast(out.grad * b.value, a.value.shape)
            b.grad += _unbroadcast(out.grad * a.value, b.value.shape)
        return fn

    return _out(val, back, "mul")


def neg(a: Tensor) -> Tensor:
    def back(out: Tensor):
        def fn() -> None:
            a.grad -= out.grad
        return fn

    return _out(-a.value, back, "neg")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for the rank combinations (2,2), (2,1), (1,2), (1,1)."""
    av, bv = a.value, b.value
    if av.ndim == 0 or bv.ndim == 0:
        raise ShapeError(f"cannot matmul {av.shape} with {bv.shape}")
    if av.shape[-1] != bv.shape[0]:
        raise ShapeError(f"cannot matmul {av.shape} with {bv.shape}")
    val = av @ bv

    def back(out: Tensor):
        def fn() -> None:
            g = out.grad
            if av.ndim == 2 and bv.ndim == 2:
                a.grad += g @ bv.T
                b.grad += av.T @ g
            elif av.ndim == 2 and bv.ndim == 1:
                a.grad += np.outer(g, bv)
                b.grad += av.T @ g
            elif av.ndim == 1 and bv.ndim == 2:
                a.grad += bv @ g
                b.grad += np.outer(av, g)
            else:  # vec . vec
                a.grad += g * bv
                b.grad += g * av
        return fn

    return _out(val, back, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.value.ndim != 2:
        raise ShapeError(f"transpose requires a matrix, got shape {a.value.shape}")

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad.T
        return fn

    return _out(a.value.T.copy(), back, "transpose")


# ---------------------------------------------------------------------------
# structure

def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    if not parts:
        raise ShapeError("concat of empty sequence")
    for p in parts:
        if p.value.ndim != 1:
            raise ShapeError(f"concat requires vectors, got shape {p.value.shape}")
    sizes = [p.value.shape[0] for p in parts]
    val = np.concatenate([p.value for p in parts])

    def back(out: Tensor):
        def fn() -> None:
            o = 0
            for p, n in zip(parts, sizes):
                p.grad += out.grad[o:o + n]
                o += n
        return fn

    return _out(val, back, "concat")


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate matrices with equal row counts along columns."""
    rows = parts[0].value.shape[0]
    for p in parts:
        if p.value.ndim != 2 or p.value.shape[0] != rows:
            raise ShapeError("concat_cols requires matrices with equal row counts")
    widths = [p.value.shape[1] for p in parts]
    val = np.concatenate([p.value for p in parts], axis=1)

    def back(out: Tensor):
        def fn() -> None:
            o = 0
            for p, w in zip(parts, widths):
                p.grad += out.grad[:, o:o + w]
                o += w
        return fn

    return _out(val, back, "concat_cols")


def stack_rows(rows: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a matrix."""
    if not rows:
        raise ShapeError("stack_rows of empty sequence")
    val = np.stack([r.value for r in rows])

    def back(out: Tensor):
        def fn() -> None:
            for i, r in enumerate(rows):
                r.grad += out.grad[i]
        return fn

    return _out(val, back, "stack_rows")


def slice1d(a: Tensor, start: int, stop: int) -> Tensor:
    if a.value.ndim != 1:
        raise ShapeError(f"slice1d requires a vector, got shape {a.value.shape}")

    def back(out: Tensor):
        def fn() -> None:
            a.grad[start:stop] += out.grad
        return fn

    return _out(a.value[start:stop].copy(), back, "slice1d")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad.reshape(a.value.shape)
        return fn

    return _out(a.value.reshape(shape).copy(), back, "reshape")


def take(a: Tensor, index: int) -> Tensor:
    """Pick one entry of a vector as a scalar."""
    if a.value.ndim != 1:
        raise ShapeError(f"take requires a vector, got shape {a.value.shape}")

    def back(out: Tensor):
        def fn() -> None:
            a.grad[index] += out.grad
        return fn

    return _out(a.value[index], back, "take")


def take_row(a: Tensor, index: int) -> Tensor:
    if a.value.ndim != 2:
        raise ShapeError(f"take_row requires a matrix, got shape {a.value.shape}")

    def back(out: Tensor):
        def fn() -> None:
            a.grad[index] += out.grad
        return fn

    return _out(a.value[index].copy(), back, "take_row")


def take_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows of a matrix; duplicate indices accumulate in backward."""
    if a.value.ndim != 2:
        raise ShapeError(f"take_rows requires a matrix, got shape {a.value.shape}")
    idx = np.asarray(indices, dtype=np.intp)

    def back(out: Tensor):
        def fn() -> None:
            np.add.at(a.grad, idx, out.grad)
        return fn

    return _out(a.value[idx].copy(), back, "take_rows")


def gather_sum(a: Tensor, indices: Sequence[int]) -> Tensor:
    """Sum of selected vector entries (scalar)."""
    if a.value.ndim != 1:
        raise ShapeError(f"gather_sum requires a vector, got shape {a.value.shape}")
    idx = np.asarray(indices, dtype=np.intp)

    def back(out: Tensor):
        def fn() -> None:
            np.add.at(a.grad, idx, out.grad)
        return fn

    return _out(a.value[idx].sum(), back, "gather_sum")


def scale_rows(a: Tensor, s: Tensor) -> Tensor:
    """Multiply row k of matrix `a` by scalar s[k]."""
    if a.value.ndim != 2 or s.value.ndim != 1 or a.value.shape[0] != s.value.shape[0]:
        raise ShapeError(f"cannot scale rows of {a.value.shape} by {s.value.shape}")
    val = a.value * s.value[:, None]

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad * s.value[:, None]
            s.grad += (out.grad * a.value).sum(axis=1)
        return fn

    return _out(val, back, "scale_rows")


def rows_weighted_sum(weights: Tensor, table: Tensor) -> Tensor:
    """Per-row weighted sums: out[k] = sum_z weights[k,z] * table[k*Z+z].

    `weights` is (K, Z); `table` is (K*Z, n) laid out row-major by (k, z).
    """
    k, z = weights.value.shape
    if table.value.shape[0] != k * z:
        raise ShapeError(
            f"rows_weighted_sum: weights {weights.value.shape} do not tile table {table.value.shape}")
    t3 = table.value.reshape(k, z, -1)
    val = np.einsum("kz,kzn->kn", weights.value, t3)

    def back(out: Tensor):
        def fn() -> None:
            weights.grad += np.einsum("kn,kzn->kz", out.grad, t3)
            table.grad += np.einsum("kz,kn->kzn", weights.value, out.grad).reshape(table.value.shape)
        return fn

    return _out(val, back, "rows_weighted_sum")


def sum_all(a: Tensor) -> Tensor:
    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad
        return fn

    return _out(a.value.sum(), back, "sum_all")


# ---------------------------------------------------------------------------
# nonlinearities

def sigmoid(a: Tensor) -> Tensor:
    # tanh form avoids exp overflow for large |x|
    val = 0.5 * (np.tanh(0.5 * a.value) + 1.0)

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad * val * (1.0 - val)
        return fn

    return _out(val, back, "sigmoid")


def tanh(a: Tensor) -> Tensor:
    val = np.tanh(a.value)

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad * (1.0 - val * val)
        return fn

    return _out(val, back, "tanh")


def relu(a: Tensor) -> Tensor:
    val = np.maximum(a.value, 0.0)

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad * (a.value > 0.0)
        return fn

    return _out(val, back, "relu")


def exp(a: Tensor) -> Tensor:
    val = np.exp(a.value)

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad * val
        return fn

    return _out(val, back, "exp")


def log(a: Tensor) -> Tensor:
    val = np.log(a.value)

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad / a.value
        return fn

    return _out(val, back, "log")


def softmax(a: Tensor) -> Tensor:
    """Probability vector via max-subtracted exponentials."""
    if a.value.ndim != 1 or a.value.shape[0] == 0:
        raise ValueError(f"softmax requires a non-empty vector, got shape {a.value.shape}")
    shifted = a.value - a.value.max()
    e = np.exp(shifted)
    val = e / e.sum()

    def back(out: Tensor):
        def fn() -> None:
            g = out.grad
            a.grad += val * (g - float(g @ val))
        return fn

    return _out(val, back, "softmax")


def masked_softmax_rows(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise softmax of a matrix; cells with mask 0 get exactly zero weight.

    Raises on fully-masked rows (nothing to normalize over).
    """
    if scores.value.ndim != 2:
        raise ShapeError(f"masked_softmax_rows requires a matrix, got {scores.value.shape}")
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != scores.value.shape:
        raise ShapeError(f"mask shape {m.shape} does not match scores {scores.value.shape}")
    if np.any(m.sum(axis=1) == 0.0):
        raise ValueError("masked_softmax_rows: a row is fully masked")
    z = np.where(m > 0.0, scores.value, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z) * m
    val = e / e.sum(axis=1, keepdims=True)

    def back(out: Tensor):
        def fn() -> None:
            g = out.grad
            dot = (g * val).sum(axis=1, keepdims=True)
            scores.grad += val * (g - dot)
        return fn

    return _out(val, back, "masked_softmax_rows")


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate <= 0."""
    if rate <= 0.0:
        return a
    if rate >= 1.0:
        raise ValueError(f"dropout rate must be < 1, got {rate}")
    keep = (rng.random(a.value.shape) >= rate) / (1.0 - rate)
    val = a.value * keep

    def back(out: Tensor):
        def fn() -> None:
            a.grad += out.grad * keep
        return fn

    return _out(val, back, "dropout")


# ---------------------------------------------------------------------------
# recurrent cell

@dataclass
class LstmWeights:
    """Fused gate parameters: rows ordered input, forget, output, candidate."""
    in_weight: Tensor   # (4H, in)
    rec_weight: Tensor  # (4H, H)
    bias: Tensor        # (4H,)


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, weights: LstmWeights) -> tuple[Tensor, Tensor]:
    """One step of a standard gated recurrent cell."""
    hidden = h_prev.value.shape[0]
    if weights.rec_weight.value.shape != (4 * hidden, hidden):
        raise ShapeError(
            f"recurrent weight {weights.rec_weight.value.shape} does not match hidden size {hidden}")
    if weights.in_weight.value.shape[1] != x.value.shape[0]:
        raise ShapeError(
            f"input weight {weights.in_weight.value.shape} does not match input size {x.value.shape}")
    pre = add(add(matmul(weights.in_weight, x), matmul(weights.rec_weight, h_prev)), weights.bias)
    i_gate = sigmoid(slice1d(pre, 0, hidden))
    f_gate = sigmoid(slice1d(pre, hidden, 2 * hidden))
    o_gate = sigmoid(slice1d(pre, 2 * hidden, 3 * hidden))
    cand = tanh(slice1d(pre, 3 * hidden, 4 * hidden))
    c = add(mul(f_gate, c_prev), mul(i_gate, cand))
    h = mul(o_gate, tanh(c))
    return h, c


# ---------------------------------------------------------------------------
# parameters

class ParamStore:
    """Named trainable tensors plus their Adagrad accumulators."""

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}
        self.accum: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(value)
        self._params[name] = t
        self.accum[name] = np.zeros_like(t.value)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def size(self) -> int:
        return sum(t.value.size for t in self._params.values())

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, t in self._params.items():
            t.value[...] = values[k]


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], scale: float = 0.1) -> np.ndarray:
    """Seeded uniform [-scale, scale] initialization."""
    return rng.uniform(-scale, scale, size=shape)


# ---------------------------------------------------------------------------
# checkpoint io

CHECKPOINT_MAGIC = "boxscribe-ckpt v1"


def save_params(store: ParamStore, path) -> None:
    """Write parameters as line-oriented text: name, dims, row-major values.

    Values are serialized with repr() so float64 round-trips exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        for name, t in store.items():
            dims = " ".join(str(d) for d in t.value.shape)
            vals = " ".join(repr(v) for v in t.value.ravel().tolist())
            fh.write(f"{name} {t.value.ndim} {dims} {vals}".rstrip() + "\n")


def load_params(path) -> dict[str, np.ndarray]:
    """Read a checkpoint written by save_params."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file (header {header!r})")
        out: dict[str, np.ndarray] = {}
        for line in fh:
            fields = line.split()
            if not fields:
                continue
            name = fields[0]
            ndim = int(fields[1])
            shape = tuple(int(d) for d in fields[2:2 + ndim])
            vals = np.array([float(v) for v in fields[2 + ndim:]], dtype=np.float64)
            out[name] = vals.reshape(shape)
    return out


def restore_params(store: ParamStore, path) -> None:
    values = load_params(path)
    missing = set(store.names()) - set(values)
    if missing:
        raise ValueError(f"checkpoint is missing parameters: {sorted(missing)}")
    store.load_values(values)


# ---------------------------------------------------------------------------
# gradient checking

@dataclass
class GradCheckReport:
    per_param: dict[str, float]
    max_rel_err: float

    def worst(self) -> tuple[str, float]:
        name = max(self.per_param, key=self.per_param.get)
        return name, self.per_param[name]


def grad_check(
    fn: Callable[[], Tensor],
    store: ParamStore,
    eps: float = 1e-5,
    names: Sequence[str] | None = None,
) -> GradCheckReport:
    """Compare tape gradients of the scalar fn() against central differences.

    Relative error per entry is |analytic - numeric| / max(|analytic|,
    |numeric|, 1e-3); the floor keeps near-zero gradients from inflating the
    ratio past finite-difference noise.
    """
    store.zero_grads()
    tape = Tape()
    with recording(tape):
        out = fn()
    if out.value.ndim != 0:
        raise ValueError(f"grad_check requires a scalar-valued function, got shape {out.value.shape}")
    tape.backward(out)

    checked = list(names) if names is not None else store.names()
    analytic = {name: store[name].grad.copy() for name in checked}

    report: dict[str, float] = {}
    for name in checked:
        theta = store[name].value
        worst = 0.0
        flat = theta.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn().value)
            flat[i] = orig - eps
            f_minus = float(fn().value)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = analytic[name].ravel()[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
            if rel > worst:
                worst = rel
        report[name] = worst
    return GradCheckReport(per_param=report, max_rel_err=max(report.values()) if report else 0.0)


def finite_difference(fn: Callable[[], float], theta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of fn with respect to the array theta."""
    grad = np.zeros_like(theta)
    flat = theta.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = fn()
        flat[i] = orig - eps
        f_minus = fn()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad
