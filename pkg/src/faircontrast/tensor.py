"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records its inputs and a gradient closure on the result node,
so the DAG hanging off a loss tensor doubles as the tape.  ``backward`` runs a
reverse topological sweep over that DAG and accumulates gradients into
``Tensor.grad`` with ``+=`` semantics, which makes shared subexpressions and
tied parameters work without special cases.

All storage is row-major float64.  Nothing here is clever about memory or
speed beyond vectorising through numpy; batches stay small in this project.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, DimensionError, DomainError

Array = np.ndarray


class Tensor:
    """A dense array plus the bookkeeping needed for backpropagation.

    Leaf tensors are built directly (``Tensor(data, requires_grad=True)`` for
    parameters).  Operation results carry references to their parents and a
    closure that maps the upstream gradient to per-parent gradients.  A node
    requires a gradient iff it was asked to or any parent does; subgraphs that
    cannot influence a parameter are never taped.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn", "op")

    def __init__(self, data, requires_grad=False, *, _parents=(), _grad_fn=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self.grad: Array | None = None
        if self.requires_grad and _grad_fn is not None:
            self._parents = tuple(_parents)
            self._grad_fn = _grad_fn
        else:
            # constant subgraph: drop the tape so memory is freed eagerly
            self._parents = ()
            self._grad_fn = None
        self.op = op

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph control -------------------------------------------------

    def detach(self) -> "Tensor":
        """Same values, no tape.  Shares the underlying array."""
        return Tensor(self.data, op="detach")

    def backward(self) -> dict["Tensor", Array]:
        return backward(self)

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- method forms of common ops ------------------------------------

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None, keepdims=False):
        return reduce_max(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)

    def sqrt(self):
        return sqrt(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


def _coerce(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data, parents, grad_fn, op) -> Tensor:
    return Tensor(data, _parents=parents, _grad_fn=grad_fn, op=op)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise binary ops (numpy broadcasting, gradients summed back)
# ---------------------------------------------------------------------------


def _broadcast_op(a, b, forward, op):
    a, b = _coerce(a), _coerce(b)
    try:
        data = forward(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from exc
    return a, b, data


def add(a, b) -> Tensor:
    a, b, data = _broadcast_op(a, b, np.add, "add")

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node(data, (a, b), grad_fn, "add")


def sub(a, b) -> Tensor:
    a, b, data = _broadcast_op(a, b, np.subtract, "sub")

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _node(data, (a, b), grad_fn, "sub")


def mul(a, b) -> Tensor:
    a, b, data = _broadcast_op(a, b, np.multiply, "mul")

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _node(data, (a, b), grad_fn, "mul")


def div(a, b) -> Tensor:
    a, b, data = _broadcast_op(a, b, np.divide, "div")

    def grad_fn(g):
        ga = _unbroadcast(g / b.data, a.data.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return _node(data, (a, b), grad_fn, "div")


def neg(t) -> Tensor:
    t = _coerce(t)
    return _node(-t.data, (t,), lambda g: (-g,), "neg")


def scale(t, factor: float) -> Tensor:
    """Multiply by a python scalar."""
    t = _coerce(t)
    factor = float(factor)
    return _node(t.data * factor, (t,), lambda g: (g * factor,), "scale")


# ---------------------------------------------------------------------------
# elementwise unary ops
# ---------------------------------------------------------------------------


def sigmoid(t) -> Tensor:
    t = _coerce(t)
    # exp of a non-positive argument never overflows
    e = np.exp(-np.abs(t.data))
    s = np.where(t.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def grad_fn(g):
        return (g * s * (1.0 - s),)

    return _node(s, (t,), grad_fn, "sigmoid")


def relu(t) -> Tensor:
    t = _coerce(t)
    data = np.maximum(t.data, 0.0)

    def grad_fn(g):
        return (g * (t.data > 0.0),)

    return _node(data, (t,), grad_fn, "relu")


def tanh(t) -> Tensor:
    t = _coerce(t)
    data = np.tanh(t.data)

    def grad_fn(g):
        return (g * (1.0 - data * data),)

    return _node(data, (t,), grad_fn, "tanh")


def exp(t) -> Tensor:
    t = _coerce(t)
    data = np.exp(t.data)

    def grad_fn(g):
        return (g * data,)

    return _node(data, (t,), grad_fn, "exp")


def log(t) -> Tensor:
    t = _coerce(t)
    if t.data.size and np.min(t.data) <= 0.0:
        raise DomainError("log requires strictly positive inputs")
    data = np.log(t.data)

    def grad_fn(g):
        return (g / t.data,)

    return _node(data, (t,), grad_fn, "log")


def sqrt(t) -> Tensor:
    t = _coerce(t)
    if t.data.size and np.min(t.data) < 0.0:
        raise DomainError("sqrt requires non-negative inputs")
    data = np.sqrt(t.data)

    def grad_fn(g):
        return (g / (2.0 * data),)

    return _node(data, (t,), grad_fn, "sqrt")


def clip(t, lo=None, hi=None) -> Tensor:
    """Clamp values into [lo, hi].  Gradient passes through unclamped entries."""
    t = _coerce(t)
    lo_v = -np.inf if lo is None else float(lo)
    hi_v = np.inf if hi is None else float(hi)
    if lo_v > hi_v:
        raise ContractError(f"clip bounds are inverted: [{lo_v}, {hi_v}]")
    data = np.clip(t.data, lo_v, hi_v)

    def grad_fn(g):
        inside = (t.data >= lo_v) & (t.data <= hi_v)
        return (g * inside,)

    return _node(data, (t,), grad_fn, "clip")


# ---------------------------------------------------------------------------
# matmul, reshaping, concatenation
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"matmul batch shapes disagree: {a.shape} @ {b.shape}") from exc

    def grad_fn(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape)
        return ga, gb

    return _node(data, (a, b), grad_fn, "matmul")


def reshape(t, shape) -> Tensor:
    t = _coerce(t)
    shape = tuple(int(s) for s in (shape if isinstance(shape, (tuple, list)) else (shape,)))
    try:
        data = t.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {t.shape} to {shape}") from exc

    def grad_fn(g):
        return (g.reshape(t.data.shape),)

    return _node(data, (t,), grad_fn, "reshape")


def transpose(t, axes=None) -> Tensor:
    t = _coerce(t)
    axes_t = tuple(range(t.ndim))[::-1] if axes is None else tuple(int(a) for a in axes)
    if sorted(axes_t) != list(range(t.ndim)):
        raise DimensionError(f"transpose axes {axes_t} do not permute rank {t.ndim}")
    data = np.transpose(t.data, axes_t)
    inverse = np.argsort(axes_t)

    def grad_fn(g):
        return (np.transpose(g, inverse),)

    return _node(data, (t,), grad_fn, "transpose")


def concat(tensors, axis=-1) -> Tensor:
    tensors = [_coerce(t) for t in tensors]
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError("concat operands have incompatible shapes") from exc
    ax = axis % data.ndim
    sizes = [t.data.shape[ax] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        index = [slice(None)] * g.ndim
        outs = []
        for i in range(len(tensors)):
            index[ax] = slice(offsets[i], offsets[i + 1])
            outs.append(g[tuple(index)])
        return tuple(outs)

    return _node(data, tuple(tensors), grad_fn, "concat")


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def _check_reduce(t: Tensor, axis):
    if t.data.size == 0:
        raise DomainError("reduction over an empty tensor")
    if axis is not None:
        if not -t.ndim <= axis < t.ndim:
            raise DimensionError(f"axis {axis} out of range for rank {t.ndim}")
        axis = axis % t.ndim
    return axis


def _expand_reduced(g: Array, shape: tuple[int, ...], axis, keepdims) -> Array:
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def reduce_sum(t, axis=None, keepdims=False) -> Tensor:
    t = _coerce(t)
    axis = _check_reduce(t, axis)
    data = t.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        return (_expand_reduced(g, t.data.shape, axis, keepdims),)

    return _node(data, (t,), grad_fn, "sum")


def reduce_mean(t, axis=None, keepdims=False) -> Tensor:
    t = _coerce(t)
    axis = _check_reduce(t, axis)
    count = t.data.size if axis is None else t.data.shape[axis]
    data = t.data.mean(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        return (_expand_reduced(g, t.data.shape, axis, keepdims) / count,)

    return _node(data, (t,), grad_fn, "mean")


def reduce_max(t, axis=None, keepdims=False) -> Tensor:
    """Max reduction.  Ties route the gradient to the first maximal entry."""
    t = _coerce(t)
    axis = _check_reduce(t, axis)
    data = t.data.max(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        mask = np.zeros_like(t.data)
        if axis is None:
            mask.reshape(-1)[np.argmax(t.data)] = 1.0
            return (mask * g,)
        idx = np.expand_dims(np.argmax(t.data, axis=axis), axis)
        np.put_along_axis(mask, idx, 1.0, axis=axis)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (mask * gg,)

    return _node(data, (t,), grad_fn, "max")


# ---------------------------------------------------------------------------
# softmax, cosine similarity, convolution
# ---------------------------------------------------------------------------


def softmax(t, axis=-1) -> Tensor:
    """Numerically stable softmax along ``axis``."""
    t = _coerce(t)
    if t.data.size == 0 or t.data.shape[axis] == 0:
        raise DomainError("softmax over an empty axis")
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)

    return _node(s, (t,), grad_fn, "softmax")


def cosine_sim(u, v) -> Tensor:
    """Cosine similarity of two equal-length vectors, composed from primitives
    so the gradient needs no hand derivation."""
    u, v = _coerce(u), _coerce(v)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise DimensionError(f"cosine_sim needs equal-length vectors, got {u.shape} and {v.shape}")
    if not np.linalg.norm(u.data) or not np.linalg.norm(v.data):
        raise DomainError("cosine similarity of a zero vector is undefined")
    dot = (u * v).sum()
    denom = (u * u).sum().sqrt() * (v * v).sum().sqrt()
    return div(dot, denom)


def conv1d(x, kernels, stride=1) -> Tensor:
    """Valid (no padding) cross-correlation along the time axis.

    ``x`` is [T, F] or batched [N, T, F]; ``kernels`` is [K, W, F].  Output has
    floor((T - W) / stride) + 1 time steps and K channels.
    """
    x, kernels = _coerce(x), _coerce(kernels)
    if int(stride) < 1:
        raise ContractError(f"stride must be >= 1, got {stride}")
    stride = int(stride)
    if kernels.ndim != 3:
        raise DimensionError(f"kernels must be [K, W, F], got {kernels.shape}")
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3:
        raise DimensionError(f"input must be [T, F] or [N, T, F], got {x.shape}")
    n, t_len, feat = xd.shape
    n_k, width, k_feat = kernels.shape
    if k_feat != feat:
        raise DimensionError(f"kernel feature dim {k_feat} does not match input feature dim {feat}")
    if width > t_len:
        raise DimensionError(f"kernel width {width} exceeds sequence length {t_len}")

    windows = sliding_window_view(xd, width, axis=1)[:, ::stride]  # [n, T', F, W]
    out = np.einsum("ntfw,kwf->ntk", windows, kernels.data)
    t_out = out.shape[1]

    def grad_fn(g):
        gg = g[None] if squeeze else g
        g_k = np.einsum("ntk,ntfw->kwf", gg, windows)
        g_x = np.zeros_like(xd)
        for w in range(width):
            contrib = np.einsum("ntk,kf->ntf", gg, kernels.data[:, w, :])
            g_x[:, w : w + stride * t_out : stride, :] += contrib
        return (g_x[0] if squeeze else g_x), g_k

    return _node(out[0] if squeeze else out, (x, kernels), grad_fn, "conv1d")


# ---------------------------------------------------------------------------
# backward sweep
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> dict[Tensor, Array]:
    """Reverse-topological gradient sweep from a scalar loss.

    Populates ``.grad`` on every gradient-requiring node reachable from the
    loss (accumulating across shared uses) and returns a map from the leaf
    tensors to their gradients.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._grad_fn is None or node.grad is None:
            continue
        grads = node._grad_fn(node.grad)
        for parent, g in zip(node._parents, grads):
            if not parent.requires_grad or g is None:
                continue
            g = np.asarray(g, dtype=np.float64)
            if parent.grad is None:
                parent.grad = g.reshape(parent.data.shape).copy()
            else:
                parent.grad = parent.grad + g.reshape(parent.data.shape)

    return {
        node: node.grad
        for node in topo
        if node.requires_grad and node._grad_fn is None and node.grad is not None
    }


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None
