"""Reverse-mode automatic differentiation over numpy arrays.

A small graph engine sized for the networks this package trains: dense
layers with ReLU, bounded output heads, and multi-head attention over
message sets. Forward passes build a graph of `Tensor` nodes; calling
:func:`backward` on a scalar root accumulates gradients into every
parameter reachable from it. Adam consumes and clears those gradients.

Leaf tensors are validated to be finite on construction; intermediate op
outputs are not re-checked (the scalar root is checked again inside
:func:`backward`), so a NaN produced mid-graph surfaces at the loss.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "NonFiniteError",
    "ParamBlock",
    "Linear",
    "MLP",
    "MultiHeadAttention",
    "no_grad",
    "backward",
    "adam_step",
    "grad_check",
    "GradCheckReport",
    "save_checkpoint",
    "load_checkpoint",
    "add",
    "sub",
    "mul",
    "matmul",
    "scale",
    "relu",
    "tanh",
    "sigmoid",
    "softplus",
    "square",
    "mean_all",
    "sum_all",
    "concat_cols",
    "stack_rows",
    "project_seq",
    "dot_qk",
    "weighted_values",
    "masked_softmax",
    "attention_over_set",
]

_GRAD_ENABLED = True


class NonFiniteError(ValueError):
    """A NaN or infinity crossed a graph boundary."""


class no_grad:
    """Context manager that disables graph construction (data-only compute)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("non-finite values rejected at graph boundary")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _result(data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    out = object.__new__(Tensor)
    out.data = data
    out.grad = None
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / linear algebra ops


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def back(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _result(data, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def back(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _result(data, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def back(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _result(data, (a, b), back)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    data = a.data * c

    def back(g):
        _accumulate(a, g * c)

    return _result(data, (a,), back)


def shift(a: Tensor, c: float) -> Tensor:
    data = a.data + float(c)

    def back(g):
        _accumulate(a, g)

    return _result(data, (a,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product (B, n) @ (n, m)."""
    data = a.data @ b.data

    def back(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _result(data, (a, b), back)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def back(g):
        _accumulate(a, g * (a.data > 0.0))

    return _result(data, (a,), back)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def back(g):
        _accumulate(a, g * (1.0 - data * data))

    return _result(data, (a,), back)


def sigmoid(a: Tensor) -> Tensor:
    data = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                    np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def back(g):
        _accumulate(a, g * data * (1.0 - data))

    return _result(data, (a,), back)


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x), computed stably; derivative is sigmoid(x)."""
    data = np.logaddexp(0.0, a.data)

    def back(g):
        s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                     np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
        _accumulate(a, g * s)

    return _result(data, (a,), back)


def square(a: Tensor) -> Tensor:
    data = a.data * a.data

    def back(g):
        _accumulate(a, g * 2.0 * a.data)

    return _result(data, (a,), back)


def sum_all(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum())

    def back(g):
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    return _result(data, (a,), back)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    data = np.asarray(a.data.mean())

    def back(g):
        _accumulate(a, np.broadcast_to(g / n, a.data.shape).copy())

    return _result(data, (a,), back)


def concat_cols(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate 2-D tensors along axis 1."""
    data = np.concatenate([t.data for t in tensors], axis=1)
    widths = [t.data.shape[1] for t in tensors]

    def back(g):
        off = 0
        for t, w in zip(tensors, widths):
            _accumulate(t, g[:, off:off + w])
            off += w

    return _result(data, tuple(tensors), back)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack S tensors of shape (B, d) into (B, S, d)."""
    data = np.stack([t.data for t in tensors], axis=1)

    def back(g):
        for s, t in enumerate(tensors):
            _accumulate(t, g[:, s, :])

    return _result(data, tuple(tensors), back)


def project_seq(kv: Tensor, w: Tensor) -> Tensor:
    """(B, S, d) @ (d, k) -> (B, S, k)."""
    data = kv.data @ w.data

    def back(g):
        _accumulate(kv, g @ w.data.T)
        _accumulate(w, np.einsum("bsd,bsk->dk", kv.data, g))

    return _result(data, (kv, w), back)


def dot_qk(q: Tensor, k: Tensor, scale_const: float) -> Tensor:
    """Attention logits: (B, dk) x (B, S, dk) -> (B, S), scaled."""
    c = float(scale_const)
    data = np.einsum("bd,bsd->bs", q.data, k.data) * c

    def back(g):
        gc = g * c
        _accumulate(q, np.einsum("bs,bsd->bd", gc, k.data))
        _accumulate(k, np.einsum("bs,bd->bsd", gc, q.data))

    return _result(data, (q, k), back)


def weighted_values(alpha: Tensor, v: Tensor) -> Tensor:
    """Attention readout: (B, S) weights x (B, S, dk) values -> (B, dk)."""
    data = np.einsum("bs,bsd->bd", alpha.data, v.data)

    def back(g):
        _accumulate(alpha, np.einsum("bd,bsd->bs", g, v.data))
        _accumulate(v, np.einsum("bs,bd->bsd", alpha.data, g))

    return _result(data, (alpha, v), back)


def masked_softmax(logits: Tensor, mask: np.ndarray | None) -> Tensor:
    """Softmax over the last axis; masked-out entries get probability exactly 0.

    `mask` is a plain boolean array broadcastable to `logits` (no gradient
    flows through it). Every row must keep at least one active entry.
    """
    x = logits.data
    if mask is None:
        m = np.ones(x.shape, dtype=bool)
    else:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    if not m.any(axis=-1).all():
        raise ValueError("masked_softmax: a row has no active entries")
    shifted = np.where(m, x, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.where(m, np.exp(shifted), 0.0)
    data = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        inner = (g * data).sum(axis=-1, keepdims=True)
        _accumulate(logits, data * (g - inner))

    return _result(data, (logits,), back)


# ---------------------------------------------------------------------------
# backward pass


def backward(root: Tensor):
    """Accumulate d(root)/d(param) for every parameter reachable from `root`.

    `root` must be a finite scalar.
    """
    if root.data.size != 1:
        raise ValueError("backward requires a scalar root")
    if not np.isfinite(root.data).all():
        raise NonFiniteError("non-finite loss at graph root")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# parameters, modules, optimizer


class ParamBlock:
    """Named parameter tensors plus their Adam moment buffers."""

    def __init__(self, name: str = ""):
        self.name = name
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.steps = 0

    def register(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(values, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None

    def grad_norm(self) -> float:
        total = 0.0
        for t in self._params.values():
            if t.grad is not None:
                total += float((t.grad ** 2).sum())
        return math.sqrt(total)

    def copy_values_from(self, other: "ParamBlock"):
        for name, t in self._params.items():
            src = other._params[name]
            if src.data.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            t.data = src.data.copy()

    def named_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + n: t.data for n, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray], prefix: str = ""):
        for n, t in self._params.items():
            src = arrays[prefix + n]
            if src.shape != t.data.shape:
                raise ValueError(f"shape mismatch loading {prefix + n!r}")
            t.data = np.array(src, dtype=np.float64)


def adam_step(block: ParamBlock, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
    """One Adam update on every parameter with a populated gradient; clears grads."""
    b1, b2 = betas
    block.steps += 1
    t = block.steps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in block._params.items():
        if p.grad is None:
            continue
        g = p.grad
        m = block._m.get(name)
        v = block._v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        block._m[name] = m
        block._v[name] = v
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad = None


def init_uniform(rng: np.random.Generator, n_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(n_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    def __init__(self, block: ParamBlock, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator):
        self.w = block.register(f"{name}.w", init_uniform(rng, n_in, (n_in, n_out)))
        self.b = block.register(f"{name}.b", init_uniform(rng, n_in, (n_out,)))

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.w), self.b)


class MLP:
    """Dense stack with ReLU hidden activations and a linear output layer.

    `widths` lists every layer width including input and output, e.g.
    [12, 64, 64, 2] is a three-layer perceptron.
    """

    def __init__(self, block: ParamBlock, name: str, widths: Sequence[int],
                 rng: np.random.Generator):
        if len(widths) < 2:
            raise ValueError("MLP needs at least input and output widths")
        self.widths = list(widths)
        self.layers = [
            Linear(block, f"{name}.l{i}", widths[i], widths[i + 1], rng)
            for i in range(len(widths) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.widths[0]:
            raise ValueError(
                f"MLP input width {x.data.shape} incompatible with {self.widths[0]}")
        for layer in self.layers[:-1]:
            x = relu(layer(x))
        return self.layers[-1](x)


class MultiHeadAttention:
    """Attention over a slot axis with per-head projections.

    Queries are (B, dim); keys/values are (B, S, dim). An optional boolean
    `mask` excludes slots exactly; an optional `log_weight` tensor is added
    to the logits, which is equivalent to scaling each slot's softmax weight
    by exp(log_weight) and renormalizing.
    """

    def __init__(self, block: ParamBlock, name: str, dim: int, heads: int,
                 rng: np.random.Generator):
        if heads < 1:
            raise ValueError("heads must be >= 1")
        if dim % heads != 0:
            raise ValueError("dim must be divisible by heads")
        self.dim = dim
        self.heads = heads
        self.dk = dim // heads
        self.wq = [block.register(f"{name}.h{h}.wq", init_uniform(rng, dim, (dim, self.dk)))
                   for h in range(heads)]
        self.wk = [block.register(f"{name}.h{h}.wk", init_uniform(rng, dim, (dim, self.dk)))
                   for h in range(heads)]
        self.wv = [block.register(f"{name}.h{h}.wv", init_uniform(rng, dim, (dim, self.dk)))
                   for h in range(heads)]
        self.wo = block.register(f"{name}.wo", init_uniform(rng, dim, (dim, dim)))
        self.bo = block.register(f"{name}.bo", init_uniform(rng, dim, (dim,)))

    def __call__(self, query: Tensor, kv: Tensor, mask: np.ndarray | None = None,
                 log_weight: Tensor | None = None) -> Tensor:
        inv = 1.0 / math.sqrt(self.dk)
        heads_out = []
        for h in range(self.heads):
            q = matmul(query, self.wq[h])
            k = project_seq(kv, self.wk[h])
            v = project_seq(kv, self.wv[h])
            logits = dot_qk(q, k, inv)
            if log_weight is not None:
                logits = add(logits, log_weight)
            alpha = masked_softmax(logits, mask)
            heads_out.append(weighted_values(alpha, v))
        merged = heads_out[0] if len(heads_out) == 1 else concat_cols(heads_out)
        return add(matmul(merged, self.wo), self.bo)

    def attention_weights(self, query: Tensor, kv: Tensor,
                          mask: np.ndarray | None = None) -> np.ndarray:
        """Per-head softmax weights, for inspection; shape (heads, B, S)."""
        inv = 1.0 / math.sqrt(self.dk)
        with no_grad():
            out = []
            for h in range(self.heads):
                q = matmul(query, self.wq[h])
                k = project_seq(kv, self.wk[h])
                out.append(masked_softmax(dot_qk(q, k, inv), mask).data)
        return np.stack(out, axis=0)


def attention_over_set(mha: MultiHeadAttention, query: Tensor,
                       kv_list: Sequence[Tensor],
                       log_weight: Tensor | None = None) -> Tensor:
    """Attend over an explicit list of (B, dim) tensors.

    An empty list degenerates to attention over the query alone, so the
    output is still a learned function of the query.
    """
    slots = list(kv_list) if kv_list else [query]
    return mha(query, stack_rows(slots), mask=None, log_weight=log_weight)


# ---------------------------------------------------------------------------
# finite-difference gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    passed: bool
    worst_param: str

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"grad_check {status}: max rel error {self.max_rel_error:.3e} "
                f"(tol {self.tolerance:.1e}, worst {self.worst_param})")


def grad_check(forward: Callable[[], Tensor], blocks: Iterable[ParamBlock],
               tolerance: float = 1e-4, eps: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    `forward` must rebuild its graph from the current parameter values and
    return a scalar Tensor. Every coordinate of every parameter in `blocks`
    is perturbed by +/- eps.
    """
    blocks = list(blocks)
    for b in blocks:
        b.zero_grads()
    root = forward()
    backward(root)
    analytic = {
        (b.name, n): (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for b in blocks for n, p in b.items()
    }
    worst = 0.0
    worst_name = "(none)"
    with no_grad():
        for b in blocks:
            for n, p in b.items():
                flat = p.data.reshape(-1)
                a_flat = analytic[(b.name, n)].reshape(-1)
                for idx in range(flat.size):
                    orig = flat[idx]
                    flat[idx] = orig + eps
                    f_plus = forward().item()
                    flat[idx] = orig - eps
                    f_minus = forward().item()
                    flat[idx] = orig
                    numeric = (f_plus - f_minus) / (2.0 * eps)
                    a = a_flat[idx]
                    rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
                    if rel > worst:
                        worst = rel
                        worst_name = f"{b.name}/{n}[{idx}]"
    for b in blocks:
        b.zero_grads()
    return GradCheckReport(max_rel_error=worst, tolerance=tolerance,
                           passed=worst <= tolerance, worst_param=worst_name)


# ---------------------------------------------------------------------------
# checkpoint serialization

_MAGIC = b"DACMCKPT"
_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict[str, str] | None = None):
    """Write named tensors to a flat binary file.

    Layout: magic, u32 version, u32 meta length + UTF-8 key=value lines,
    u32 entry count, a directory of (name, shape) records, then each
    tensor's payload as little-endian float64 in directory order. Names are
    sorted so the file is a deterministic function of its contents.
    """
    names = sorted(arrays)
    meta = meta or {}
    meta_blob = "".join(f"{k}={v}\n" for k, v in sorted(meta.items())).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", len(meta_blob)))
        fh.write(meta_blob)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            nb = name.encode("utf-8")
            arr = np.asarray(arrays[name], dtype=np.float64)
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
        for name in names:
            arr = np.ascontiguousarray(np.asarray(arrays[name], dtype=np.float64))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", fh.read(4))
        meta: dict[str, str] = {}
        if meta_len:
            for line in fh.read(meta_len).decode("utf-8").splitlines():
                k, _, v = line.partition("=")
                meta[k] = v
        (count,) = struct.unpack("<I", fh.read(4))
        entries = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            entries.append((name, shape))
        arrays: dict[str, np.ndarray] = {}
        for name, shape in entries:
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    return arrays, meta
