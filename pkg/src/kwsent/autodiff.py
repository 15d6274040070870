"""Reverse-mode automatic differentiation over small dense tensors.

Tape-based: every operation returns a new Tensor holding its forward value
and a closure that routes the output gradient back to the operation's
inputs. Calling ``backward()`` on a scalar walks the recorded graph once in
reverse topological order. Graphs are built per evaluation and garbage
collected afterwards; parameters are the long-lived leaves.

Values are float64 throughout. Every op output and every gradient is
checked for finiteness, so numerical blow-ups surface as NonFiniteError at
the op that produced them instead of as silent NaN propagation.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .exceptions import NonFiniteError


def _require_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{what} contains NaN or infinite values")


class Tensor:
    """A node in the computation graph: value, gradient buffer, backprop hook."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, value, requires_grad: bool = False, parents: tuple = ()):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim > 2:
            raise ValueError(f"tensors are at most 2-D, got ndim={array.ndim}")
        _require_finite(array, "tensor value")
        self.value = array
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backprop: Callable[[], None] | None = None

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.value.ndim != 0:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._backprop is not None and node.grad is not None:
                node._backprop()
        for node in topo:
            if node.grad is not None:
                _require_finite(node.grad, "gradient")

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def parameter(value) -> Tensor:
    return Tensor(value, requires_grad=True)


def _acc(tensor: Tensor, grad: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.value)
    tensor.grad += grad


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.value.shape != b.value.shape:
        raise ValueError(f"{op}: shape mismatch {a.value.shape} vs {b.value.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = Tensor(a.value + b.value, parents=(a, b))

    def backprop():
        _acc(a, out.grad)
        _acc(b, out.grad)

    out._backprop = backprop
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    out = Tensor(a.value - b.value, parents=(a, b))

    def backprop():
        _acc(a, out.grad)
        _acc(b, -out.grad)

    out._backprop = backprop
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of same-shape tensors."""
    _same_shape(a, b, "mul")
    out = Tensor(a.value * b.value, parents=(a, b))

    def backprop():
        _acc(a, out.grad * b.value)
        _acc(b, out.grad * a.value)

    out._backprop = backprop
    return out


def scale(a: Tensor, factor: float) -> Tensor:
    out = Tensor(a.value * factor, parents=(a,))

    def backprop():
        _acc(a, out.grad * factor)

    out._backprop = backprop
    return out


def one_minus(a: Tensor) -> Tensor:
    out = Tensor(1.0 - a.value, parents=(a,))

    def backprop():
        _acc(a, -out.grad)

    out._backprop = backprop
    return out


def matvec(w: Tensor, x: Tensor) -> Tensor:
    """W @ x for a 2-D W of shape (m, n) and a 1-D x of length n."""
    if w.value.ndim != 2 or x.value.ndim != 1 or w.value.shape[1] != x.value.shape[0]:
        raise ValueError(f"matvec: incompatible shapes {w.value.shape}, {x.value.shape}")
    out = Tensor(w.value @ x.value, parents=(w, x))

    def backprop():
        _acc(w, np.outer(out.grad, x.value))
        _acc(x, w.value.T @ out.grad)

    out._backprop = backprop
    return out


def vecmat(x: Tensor, w: Tensor) -> Tensor:
    """x @ W for a 1-D x of length m and a 2-D W of shape (m, n)."""
    if x.value.ndim != 1 or w.value.ndim != 2 or x.value.shape[0] != w.value.shape[0]:
        raise ValueError(f"vecmat: incompatible shapes {x.value.shape}, {w.value.shape}")
    out = Tensor(x.value @ w.value, parents=(x, w))

    def backprop():
        _acc(x, w.value @ out.grad)
        _acc(w, np.outer(x.value, out.grad))

    out._backprop = backprop
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D by 2-D matrix product."""
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.value.shape}, {b.value.shape}")
    out = Tensor(a.value @ b.value, parents=(a, b))

    def backprop():
        _acc(a, out.grad @ b.value.T)
        _acc(b, a.value.T @ out.grad)

    out._backprop = backprop
    return out


def add_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """Add a 1-D row vector to every row of a 2-D tensor."""
    if m.value.ndim != 2 or v.value.ndim != 1 or m.value.shape[1] != v.value.shape[0]:
        raise ValueError(
            f"add_rowvec: incompatible shapes {m.value.shape}, {v.value.shape}"
        )
    out = Tensor(m.value + v.value[None, :], parents=(m, v))

    def backprop():
        _acc(m, out.grad)
        _acc(v, out.grad.sum(axis=0))

    out._backprop = backprop
    return out


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product of two 1-D tensors; returns a scalar tensor."""
    if a.value.ndim != 1 or b.value.ndim != 1:
        raise ValueError("dot expects 1-D tensors")
    _same_shape(a, b, "dot")
    out = Tensor(a.value @ b.value, parents=(a, b))

    def backprop():
        _acc(a, out.grad * b.value)
        _acc(b, out.grad * a.value)

    out._backprop = backprop
    return out


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 1-D tensors into one 1-D tensor."""
    if not parts:
        raise ValueError("concat of zero tensors")
    for p in parts:
        if p.value.ndim != 1:
            raise ValueError("concat expects 1-D tensors")
    out = Tensor(np.concatenate([p.value for p in parts]), parents=tuple(parts))
    sizes = [p.value.shape[0] for p in parts]

    def backprop():
        offset = 0
        for p, size in zip(parts, sizes):
            _acc(p, out.grad[offset : offset + size])
            offset += size

    out._backprop = backprop
    return out


def stack_rows(rows: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a 2-D (n, d) tensor."""
    if not rows:
        raise ValueError("stack_rows of zero tensors")
    out = Tensor(np.stack([r.value for r in rows]), parents=tuple(rows))

    def backprop():
        for i, r in enumerate(rows):
            _acc(r, out.grad[i])

    out._backprop = backprop
    return out


def pick_row(m: Tensor, index: int) -> Tensor:
    """Select row ``index`` of a 2-D tensor (embedding lookup)."""
    if m.value.ndim != 2:
        raise ValueError("pick_row expects a 2-D tensor")
    if not (0 <= index < m.value.shape[0]):
        raise ValueError(f"row index {index} out of range")
    out = Tensor(m.value[index].copy(), parents=(m,))

    def backprop():
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.value)
            m.grad[index] += out.grad

    out._backprop = backprop
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.value
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s, parents=(a,))

    def backprop():
        _acc(a, out.grad * s * (1.0 - s))

    out._backprop = backprop
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.value)
    out = Tensor(t, parents=(a,))

    def backprop():
        _acc(a, out.grad * (1.0 - t * t))

    out._backprop = backprop
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.value, 0.0), parents=(a,))

    def backprop():
        _acc(a, out.grad * (a.value > 0.0))

    out._backprop = backprop
    return out


def softmax(a: Tensor) -> Tensor:
    """Numerically stable softmax of a 1-D tensor; output lies on the simplex."""
    if a.value.ndim != 1:
        raise ValueError("softmax expects a 1-D tensor")
    shifted = a.value - a.value.max()
    e = np.exp(shifted)
    p = e / e.sum()
    out = Tensor(p, parents=(a,))

    def backprop():
        g = out.grad
        _acc(a, p * (g - g @ p))

    out._backprop = backprop
    return out


def max_over_rows(m: Tensor) -> Tensor:
    """Coordinate-wise max over the row axis of a 2-D tensor.

    The gradient routes to the first argmax row per coordinate, which keeps
    tie handling deterministic.
    """
    if m.value.ndim != 2:
        raise ValueError("max_over_rows expects a 2-D tensor")
    if m.value.shape[0] < 1:
        raise ValueError("max_over_rows needs at least one row")
    winners = np.argmax(m.value, axis=0)
    out = Tensor(m.value[winners, np.arange(m.value.shape[1])], parents=(m,))

    def backprop():
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.value)
            m.grad[winners, np.arange(m.value.shape[1])] += out.grad

    out._backprop = backprop
    return out


def log_prob_of(logits: Tensor, label: int) -> Tensor:
    """ln softmax(logits)[label], computed with max-subtraction stability."""
    if logits.value.ndim != 1:
        raise ValueError("log_prob_of expects 1-D logits")
    n = logits.value.shape[0]
    if not (0 <= label < n):
        raise ValueError(f"label {label} out of range [0, {n})")
    shifted = logits.value - logits.value.max()
    log_z = np.log(np.exp(shifted).sum())
    p = np.exp(shifted - log_z)
    out = Tensor(shifted[label] - log_z, parents=(logits,))

    def backprop():
        g = float(out.grad)
        contribution = -g * p
        contribution[label] += g
        _acc(logits, contribution)

    out._backprop = backprop
    return out


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    """Plain-array stable softmax (no graph)."""
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def grad_check(
    f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5
) -> float:
    """Max relative error between reverse-mode and central finite differences.

    ``f`` rebuilds the scalar loss from the current parameter values each
    time it is called; ``params`` are perturbed in place coordinate by
    coordinate. The relative error per coordinate is
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params:
        p.zero_grad()
    loss = f()
    loss.backward()
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.value) for p in params
    ]
    worst = 0.0
    for p, grads in zip(params, analytic):
        flat_value = p.value.reshape(-1)
        flat_grad = grads.reshape(-1)
        for i in range(flat_value.shape[0]):
            original = flat_value[i]
            flat_value[i] = original + eps
            f_plus = float(f().value)
            flat_value[i] = original - eps
            f_minus = float(f().value)
            flat_value[i] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(flat_grad[i])
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst
