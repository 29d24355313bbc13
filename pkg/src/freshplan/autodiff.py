"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

A `Tensor` is one node of an acyclic computation graph: it holds a value, a
gradient slot, references to its operand nodes, and a closure that applies the
local derivative during the backward sweep.  Scalars are tensors of shape ();
`backward` may only be started from one of those.  The op set is exactly what
the forecasting model needs (elementwise arithmetic, matmul with stacked batch
dimensions, time-axis shift/concat for causal convolutions, softmax, reductions)
rather than a general broadcasting engine.

Gradient correctness is validated against central finite differences in the
test suite; `finite_difference_check` implements the probe.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvariantError


class Tensor:
    """Node in a reverse-mode computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, _lift(-1.0))

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __pow__(self, exponent):
        return pow_const(self, float(exponent))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# -- elementwise ---------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backprop(g: np.ndarray) -> None:
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backprop)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backprop(g: np.ndarray) -> None:
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(-g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backprop)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backprop(g: np.ndarray) -> None:
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backprop)


def pow_const(a: Tensor, exponent: float) -> Tensor:
    out_data = a.data ** exponent

    def backprop(g: np.ndarray) -> None:
        a.accumulate(g * exponent * a.data ** (exponent - 1.0))

    return Tensor(out_data, _parents=(a,), _backward=backprop)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    out_data = np.where(mask, a.data, 0.0)

    def backprop(g: np.ndarray) -> None:
        a.accumulate(g * mask)

    return Tensor(out_data, _parents=(a,), _backward=backprop)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backprop(g: np.ndarray) -> None:
        a.accumulate(g * out_data)

    return Tensor(out_data, _parents=(a,), _backward=backprop)


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def backprop(g: np.ndarray) -> None:
        a.accumulate(g / a.data)

    return Tensor(out_data, _parents=(a,), _backward=backprop)


# -- linear algebra -------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy's stacked-batch semantics."""
    out_data = a.data @ b.data

    def backprop(g: np.ndarray) -> None:
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        a.accumulate(_unbroadcast(ga, a.data.shape))
        b.accumulate(_unbroadcast(gb, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backprop)


def take_index(a: Tensor, index: int) -> Tensor:
    """Select a[index] along the first axis."""
    out_data = a.data[index]

    def backprop(g: np.ndarray) -> None:
        ga = np.zeros_like(a.data)
        ga[index] = g
        a.accumulate(ga)

    return Tensor(out_data, _parents=(a,), _backward=backprop)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def backprop(g: np.ndarray) -> None:
        a.accumulate(g.reshape(a.data.shape))

    return Tensor(out_data, _parents=(a,), _backward=backprop)


# -- time-axis ops for causal convolution (arrays are [..., T, C]) --------


def shift_time(a: Tensor, steps: int) -> Tensor:
    """Delay the time axis by `steps`, zero-filling the start."""
    if steps < 0:
        raise InvariantError("shift_time only delays (steps >= 0)")
    out_data = np.zeros_like(a.data)
    if steps == 0:
        out_data[...] = a.data
    else:
        out_data[..., steps:, :] = a.data[..., :-steps, :]

    def backprop(g: np.ndarray) -> None:
        ga = np.zeros_like(a.data)
        if steps == 0:
            ga[...] = g
        else:
            ga[..., :-steps, :] = g[..., steps:, :]
        a.accumulate(ga)

    return Tensor(out_data, _parents=(a,), _backward=backprop)


def concat_time(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the time axis (second from last)."""
    out_data = np.concatenate([a.data, b.data], axis=-2)
    t_a = a.data.shape[-2]

    def backprop(g: np.ndarray) -> None:
        a.accumulate(g[..., :t_a, :])
        b.accumulate(g[..., t_a:, :])

    return Tensor(out_data, _parents=(a, b), _backward=backprop)


def last_step(a: Tensor) -> Tensor:
    """Select the final time step: [..., T, C] -> [..., C]."""
    out_data = a.data[..., -1, :]

    def backprop(g: np.ndarray) -> None:
        ga = np.zeros_like(a.data)
        ga[..., -1, :] = g
        a.accumulate(ga)

    return Tensor(out_data, _parents=(a,), _backward=backprop)


# -- reductions and softmax ------------------------------------------------


def mean(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.mean())
    n = a.data.size

    def backprop(g: np.ndarray) -> None:
        a.accumulate(np.full_like(a.data, float(g) / n))

    return Tensor(out_data, _parents=(a,), _backward=backprop)


def softmax_last(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max-subtraction for stability."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backprop(g: np.ndarray) -> None:
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        a.accumulate(out_data * (g - dot))

    return Tensor(out_data, _parents=(a,), _backward=backprop)


# -- backward sweep --------------------------------------------------------


def _topo_order(root: Tensor) -> list[Tensor]:
    """Topological order of the graph under `root`; raises on cycles."""
    WHITE, GRAY, BLACK = 0, 1, 2
    state: dict[int, int] = {}
    order: list[Tensor] = []
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        nid = id(node)
        if processed:
            state[nid] = BLACK
            order.append(node)
            continue
        color = state.get(nid, WHITE)
        if color == BLACK:
            continue
        if color == GRAY:
            raise InvariantError("cycle detected in computation graph")
        state[nid] = GRAY
        stack.append((node, True))
        for parent in node._parents:
            pcolor = state.get(id(parent), WHITE)
            if pcolor == GRAY:
                raise InvariantError("cycle detected in computation graph")
            if pcolor == WHITE:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Fill gradient slots of every node reachable from a scalar loss."""
    if loss.data.shape != ():
        raise InvariantError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order = _topo_order(loss)
    loss.grad = np.ones(())
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# -- parameters ------------------------------------------------------------


class ParamSet:
    """Named trainable tensors of one model, with bit-exact text persistence."""

    def __init__(self, named: Sequence[tuple[str, Tensor]]):
        names = [name for name, _ in named]
        if len(set(names)) != len(names):
            raise InvariantError("duplicate parameter names")
        self.named = list(named)

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named]

    def zero_grads(self) -> None:
        for _, t in self.named:
            t.zero_grad()

    def save(self, path: str) -> None:
        # float.hex round-trips exactly, so reloads are bit-identical.
        with open(path, "w", encoding="utf-8") as fh:
            for name, t in self.named:
                shape = "x".join(str(d) for d in t.data.shape) or "scalar"
                values = ",".join(float(v).hex() for v in t.data.ravel())
                fh.write(f"{name},{shape},{values}\n")

    def load(self, path: str) -> None:
        with open(path, encoding="utf-8") as fh:
            lines = [line.rstrip("\n") for line in fh if line.strip()]
        by_name = {name: t for name, t in self.named}
        seen = set()
        for line in lines:
            name, shape_str, *values = line.split(",")
            if name not in by_name:
                raise InvariantError(f"unknown parameter {name!r} in {path}")
            shape = () if shape_str == "scalar" else tuple(int(d) for d in shape_str.split("x"))
            data = np.array([float.fromhex(v) for v in values], dtype=np.float64).reshape(shape)
            if data.shape != by_name[name].data.shape:
                raise InvariantError(f"shape mismatch for {name!r} in {path}")
            by_name[name].data = data
            seen.add(name)
        if seen != set(by_name):
            raise InvariantError(f"{path} is missing parameters: {sorted(set(by_name) - seen)}")


class Adam:
    """Adam optimizer; step() applies the update and then zeroes the grads."""

    def __init__(self, params: ParamSet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(t.data) for t in params.tensors()]
        self._v = [np.zeros_like(t.data) for t in params.tensors()]

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        for i, tensor in enumerate(self.params.tensors()):
            g = tensor.grad
            if g is None:
                continue
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * g * g
            m_hat = self._m[i] / (1.0 - self.beta1 ** self.t)
            v_hat = self._v[i] / (1.0 - self.beta2 ** self.t)
            tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)
        self.params.zero_grads()


def sgd_adam_step(optimizer: Adam, lr: float | None = None) -> None:
    """Apply one Adam update to the optimizer's parameters and zero their grads."""
    optimizer.step(lr)


# -- gradient verification ---------------------------------------------------


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Tensor],
    h: float = 1e-4,
) -> float:
    """Max relative error between reverse-mode grads and central differences.

    `loss_fn` must rebuild the graph from the current parameter values on every
    call.  Entries where both gradients are below 1e-7 in magnitude count as
    exact matches.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    backward(loss_fn())
    analytic = [np.array(p.grad, copy=True) if p.grad is not None else np.zeros_like(p.data)
                for p in params]

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn().data)
            flat[i] = orig - h
            down = float(loss_fn().data)
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = grad.ravel()[i]
            if abs(a) < 1e-7 and abs(numeric) < 1e-7:
                continue
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-5)
            worst = max(worst, rel)
    for p in params:
        p.zero_grad()
    return worst
