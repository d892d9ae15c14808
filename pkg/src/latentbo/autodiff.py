"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

The engine is eager: calling an op immediately computes its value and appends
the node to an implicit tape (a monotone creation counter). ``backward`` on a
scalar root replays the reachable subgraph in reverse creation order, which is
a valid reverse topological order because every node is created after its
parents. Gradients accumulate into ``Tensor.grad``; parameters are ordinary
leaf tensors that live in a :class:`ParamStore` across graph builds, so their
gradients keep accumulating until an optimizer step (or ``zero_grad``) clears
them.

Everything is float64. Broadcasting follows numpy rules; the backward pass
sums gradients over broadcast axes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg


class AutodiffError(ValueError):
    """Raised for malformed graphs: shape mismatches, non-scalar backward roots."""


_COUNTER = itertools.count()


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


class Tensor:
    """A node in the computation graph: a value, its parents, and a VJP rule.

    ``parents`` and ``_vjp`` are empty for leaves (constants and parameters).
    For interior nodes ``_vjp(out_grad)`` returns one gradient array per
    parent, already reduced to the parent's shape.
    """

    __slots__ = ("value", "grad", "parents", "_vjp", "_order", "name")

    def __init__(self, value, parents=(), vjp=None, name: str = ""):
        self.value = _as_array(value)
        self.grad: np.ndarray | None = None
        self.parents: tuple[Tensor, ...] = tuple(parents)
        self._vjp = vjp
        self._order = next(_COUNTER)
        self.name = name

    # -- construction helpers -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        label = self.name or "tensor"
        return f"Tensor({label}, shape={self.value.shape})"

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- backward --------------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into ``grad`` over the reachable graph.

        The root must be scalar (a 0-d array or size-1 array).
        """
        if self.value.size != 1:
            raise AutodiffError(
                f"backward requires a scalar root, got shape {self.value.shape}"
            )
        nodes = _reachable(self)
        nodes.sort(key=lambda t: t._order, reverse=True)
        seed = np.ones_like(self.value)
        if self.grad is None:
            self.grad = seed.copy()
        else:
            self.grad = self.grad + seed
        # Local accumulation map so repeated backward() calls only add this
        # root's contribution once per node.
        local: dict[int, np.ndarray] = {id(self): seed}
        for node in nodes:
            out_grad = local.get(id(node))
            if out_grad is None or node._vjp is None:
                continue
            parent_grads = node._vjp(out_grad)
            for parent, g in zip(node.parents, parent_grads):
                if g is None:
                    continue
                prev = local.get(id(parent))
                local[id(parent)] = g if prev is None else prev + g
                if parent is not self:
                    parent.grad = g.copy() if parent.grad is None else parent.grad + g


def _reachable(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    out: list[Tensor] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        out.append(node)
        stack.extend(node.parents)
    return out


def constant(value, name: str = "") -> Tensor:
    """A leaf tensor that participates in the graph but collects no gradient use."""
    return Tensor(value, name=name)


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise AutodiffError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from exc


# -- elementwise ops -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a.value, b.value, "add")
    out_val = a.value + b.value

    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return Tensor(out_val, (a, b), vjp, "add")


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a.value, b.value, "sub")
    out_val = a.value - b.value

    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)

    return Tensor(out_val, (a, b), vjp, "sub")


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a.value, b.value, "mul")
    out_val = a.value * b.value

    def vjp(g):
        return (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        )

    return Tensor(out_val, (a, b), vjp, "mul")


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a.value, b.value, "div")
    out_val = a.value / b.value

    def vjp(g):
        return (
            _unbroadcast(g / b.value, a.value.shape),
            _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape),
        )

    return Tensor(out_val, (a, b), vjp, "div")


def neg(a) -> Tensor:
    a = _lift(a)

    def vjp(g):
        return (-g,)

    return Tensor(-a.value, (a,), vjp, "neg")


def exp(a) -> Tensor:
    a = _lift(a)
    out_val = np.exp(a.value)

    def vjp(g):
        return (g * out_val,)

    return Tensor(out_val, (a,), vjp, "exp")


def log(a) -> Tensor:
    a = _lift(a)
    out_val = np.log(a.value)

    def vjp(g):
        return (g / a.value,)

    return Tensor(out_val, (a,), vjp, "log")


def tanh(a) -> Tensor:
    a = _lift(a)
    out_val = np.tanh(a.value)

    def vjp(g):
        return (g * (1.0 - out_val * out_val),)

    return Tensor(out_val, (a,), vjp, "tanh")


def leaky_relu(a, negative_slope: float = 0.01) -> Tensor:
    a = _lift(a)
    slope = float(negative_slope)
    out_val = np.where(a.value >= 0.0, a.value, slope * a.value)

    def vjp(g):
        return (g * np.where(a.value >= 0.0, 1.0, slope),)

    return Tensor(out_val, (a,), vjp, "leaky_relu")


def relu(a) -> Tensor:
    """max(x, 0) with subgradient 0 at the kink (x == 0 contributes nothing)."""
    a = _lift(a)
    out_val = np.maximum(a.value, 0.0)

    def vjp(g):
        return (g * (a.value > 0.0),)

    return Tensor(out_val, (a,), vjp, "relu")


# -- shape / reduction ops -----------------------------------------------------


def transpose(a) -> Tensor:
    a = _lift(a)
    if a.value.ndim != 2:
        raise AutodiffError(f"transpose: expected 2-d input, got shape {a.value.shape}")

    def vjp(g):
        return (g.T,)

    return Tensor(a.value.T, (a,), vjp, "transpose")


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _lift(a)
    try:
        out_val = a.value.reshape(shape)
    except ValueError as exc:
        raise AutodiffError(
            f"reshape: cannot reshape {a.value.shape} to {shape}"
        ) from exc
    in_shape = a.value.shape

    def vjp(g):
        return (g.reshape(in_shape),)

    return Tensor(out_val, (a,), vjp, "reshape")


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    out_val = a.value.sum(axis=axis, keepdims=keepdims)
    in_shape = a.value.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, in_shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, in_shape).copy(),)

    return Tensor(out_val, (a,), vjp, "sum")


def mean(a) -> Tensor:
    a = _lift(a)
    n = a.value.size
    return tsum(a) / float(n)


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise AutodiffError(
            f"matmul: expected 2-d operands, got {a.value.shape} and {b.value.shape}"
        )
    if a.value.shape[1] != b.value.shape[0]:
        raise AutodiffError(
            f"matmul: inner dimensions differ, {a.value.shape} @ {b.value.shape}"
        )
    out_val = a.value @ b.value

    def vjp(g):
        return g @ b.value.T, a.value.T @ g

    return Tensor(out_val, (a, b), vjp, "matmul")


# -- custom ops with analytic vector-Jacobian rules ------------------------------


def pairwise_sqdist(z) -> Tensor:
    """All-pairs squared euclidean distances of the rows of ``z`` (n x n).

    Built from explicit broadcast differences so the diagonal is exactly zero
    and the matrix exactly symmetric.
    """
    z = _lift(z)
    if z.value.ndim != 2:
        raise AutodiffError(f"pairwise_sqdist: expected 2-d input, got {z.value.shape}")
    zv = z.value
    diff = zv[:, None, :] - zv[None, :, :]
    out_val = np.einsum("ijk,ijk->ij", diff, diff)

    def vjp(g):
        # d/dz_k sum_ij g_ij * ||z_i - z_j||^2 = sum_j (g_kj + g_jk) * 2 (z_k - z_j)
        w = g + g.T
        return (2.0 * (zv * w.sum(axis=1)[:, None] - w @ zv),)

    return Tensor(out_val, (z,), vjp, "pairwise_sqdist")


def pairwise_dist(z) -> Tensor:
    """All-pairs euclidean distances of the rows of ``z`` (n x n).

    The gradient of d_ij with respect to z_i is (z_i - z_j) / d_ij, defined as
    zero where d_ij == 0 (the diagonal, and exact collisions).
    """
    z = _lift(z)
    if z.value.ndim != 2:
        raise AutodiffError(f"pairwise_dist: expected 2-d input, got {z.value.shape}")
    zv = z.value
    diff = zv[:, None, :] - zv[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    out_val = np.sqrt(np.maximum(sq, 0.0))

    def vjp(g):
        w = g + g.T
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(out_val > 0.0, w / out_val, 0.0)
        return (zv * w.sum(axis=1)[:, None] - w @ zv,)

    return Tensor(out_val, (z,), vjp, "pairwise_dist")


def gaussian_nll(m, y) -> Tensor:
    """Negative log density of ``y`` under N(0, M), differentiable in M.

    value = 1/2 y^T M^-1 y + 1/2 log|M| + n/2 log(2 pi), computed through a
    Cholesky factor of M. The gradient rule is
    dNLL/dM = 1/2 (M^-1 - alpha alpha^T) with alpha = M^-1 y. Raises
    numpy.linalg.LinAlgError when M is not positive definite; callers treat
    that like a non-finite loss.
    """
    m = _lift(m)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    if m.value.shape != (n, n):
        raise AutodiffError(
            f"gaussian_nll: covariance shape {m.value.shape} does not match y ({n},)"
        )
    if not np.all(np.isfinite(m.value)):
        raise np.linalg.LinAlgError("covariance contains non-finite entries")
    chol = np.linalg.cholesky(m.value)
    alpha = scipy.linalg.cho_solve((chol, True), y)
    out_val = np.asarray(
        0.5 * float(y @ alpha)
        + float(np.log(np.diag(chol)).sum())
        + 0.5 * n * math.log(2.0 * math.pi)
    )

    def vjp(g):
        m_inv = scipy.linalg.cho_solve((chol, True), np.eye(n))
        return (float(g) * 0.5 * (m_inv - np.outer(alpha, alpha)),)

    return Tensor(out_val, (m,), vjp, "gaussian_nll")


# -- parameters and the optimizer ------------------------------------------------


class ParamStore:
    """Named trainable leaf tensors plus their Adam moment buffers."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise AutodiffError(f"parameter {name!r} already registered")
        t = Tensor(value, name=name)
        self._params[name] = t
        self._m[name] = np.zeros_like(t.value)
        self._v[name] = np.zeros_like(t.value)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def values_snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, v in values.items():
            t = self._params[k]
            v = _as_array(v)
            if v.shape != t.value.shape:
                raise AutodiffError(
                    f"parameter {k!r}: cannot load shape {v.shape} into {t.value.shape}"
                )
            t.value = v.copy()

    def copy(self) -> "ParamStore":
        dup = ParamStore()
        for k, t in self._params.items():
            dup.add(k, t.value.copy())
            dup._m[k] = self._m[k].copy()
            dup._v[k] = self._v[k].copy()
        dup.step_count = self.step_count
        return dup

    def snapshot(self) -> dict:
        """Full training state: values, Adam moments, and step count."""
        return {
            "values": {k: t.value.copy() for k, t in self._params.items()},
            "m": {k: v.copy() for k, v in self._m.items()},
            "v": {k: v.copy() for k, v in self._v.items()},
            "step_count": self.step_count,
        }

    def restore(self, snap: dict) -> None:
        """Undo to a :meth:`snapshot`, clearing any pending gradients."""
        self.load_values(snap["values"])
        for k in self._params:
            self._m[k] = snap["m"][k].copy()
            self._v[k] = snap["v"][k].copy()
            self._params[k].grad = None
        self.step_count = snap["step_count"]


def adam_step(
    store: ParamStore,
    lr: float = 1e-2,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One Adam update over every parameter in the store, then clear gradients.

    Parameters with no accumulated gradient are treated as zero-gradient (their
    moments decay, value unchanged on the first such step).
    """
    if not lr > 0.0:
        raise AutodiffError(f"adam_step: lr must be positive, got {lr}")
    b1, b2 = betas
    store.step_count += 1
    t = store.step_count
    for name, p in store._params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.value)
        m = store._m[name] = b1 * store._m[name] + (1.0 - b1) * g
        v = store._v[name] = b2 * store._v[name] + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.value = p.value - lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad = None


# -- layers ----------------------------------------------------------------------


_ACTIVATIONS = ("identity", "tanh", "leaky_relu", "relu")


def init_dense(
    store: ParamStore,
    name: str,
    in_dim: int,
    out_dim: int,
    rng: np.random.Generator,
) -> None:
    """Register weight and bias for an affine layer.

    Weights are uniform on +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
    """
    if in_dim < 1 or out_dim < 1:
        raise AutodiffError(f"dense {name!r}: dims must be >= 1, got {in_dim}, {out_dim}")
    bound = math.sqrt(6.0 / (in_dim + out_dim))
    store.add(f"{name}.W", rng.uniform(-bound, bound, size=(in_dim, out_dim)))
    store.add(f"{name}.b", np.zeros(out_dim))


def dense(
    store: ParamStore,
    name: str,
    x: Tensor,
    activation: str = "identity",
    negative_slope: float = 0.01,
) -> Tensor:
    """Apply the affine layer registered under ``name`` followed by an activation."""
    if activation not in _ACTIVATIONS:
        raise AutodiffError(f"dense {name!r}: unknown activation {activation!r}")
    h = matmul(x, store[f"{name}.W"]) + store[f"{name}.b"]
    if activation == "tanh":
        return tanh(h)
    if activation == "leaky_relu":
        return leaky_relu(h, negative_slope)
    if activation == "relu":
        return relu(h)
    return h


def dense_forward(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    activation: str = "identity",
    negative_slope: float = 0.01,
) -> np.ndarray:
    """Plain-numpy twin of :func:`dense` for graph-free forward passes."""
    h = x @ weights + bias
    if activation == "tanh":
        return np.tanh(h)
    if activation == "leaky_relu":
        return np.where(h >= 0.0, h, negative_slope * h)
    if activation == "relu":
        return np.maximum(h, 0.0)
    if activation != "identity":
        raise AutodiffError(f"unknown activation {activation!r}")
    return h


def finite_difference_grad(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function at ``x`` (same shape)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f(x)
        flat[i] = orig - step
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return g
