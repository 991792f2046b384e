"""Reverse-mode automatic differentiation over numpy arrays.

A ``Node`` wraps a float64 array together with an adjoint and links to its
parents. Every operation in this module accepts a mix of ``Node`` objects and
plain arrays/scalars; if no argument is a ``Node`` the operation runs as plain
numpy and returns a plain value, so the same formula can serve both a
differentiable path and a fast constant path.

Graphs are built append-only (a node's parents exist before the node), hence
acyclic by construction; ``backward`` still detects cycles defensively.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Node",
    "backward",
    "gradients",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "pow",
    "matmul",
    "transpose",
    "exp",
    "log",
    "tanh",
    "relu",
    "sigmoid",
    "softplus",
    "softminus",
    "sum",
    "mean",
    "concat",
    "value_of",
]

_builtin_sum = sum
_builtin_pow = pow


class Node:
    """One value in the computation graph: float64 array, adjoint, parents."""

    __slots__ = ("value", "grad", "parents", "_backward", "name")

    # Make numpy defer binary ops to Node's reflected dunders.
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.parents = tuple(parents)
        self._backward = backward
        self.name = name

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node{label}(shape={self.value.shape})"

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return self.value.item()

    def detach(self) -> np.ndarray:
        """Value as a plain array; gradients do not flow through it."""
        return np.array(self.value, copy=True)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return pow(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        out = Node(self.value[idx], parents=(self,))

        def _bw(g, node=self, idx=idx):
            buf = np.zeros_like(node.value)
            np.add.at(buf, idx, g)
            node.grad += buf

        out._backward = _bw
        return out


def _is_node(x) -> bool:
    return isinstance(x, Node)


def value_of(x):
    """Underlying numpy value of a Node, or the argument itself."""
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=np.float64)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    grad = np.asarray(grad)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def add(a, b):
    av, bv = value_of(a), value_of(b)
    out_v = av + bv
    if not (_is_node(a) or _is_node(b)):
        return out_v
    out = Node(out_v, parents=tuple(x for x in (a, b) if _is_node(x)))

    def _bw(g):
        if _is_node(a):
            a.grad += _unbroadcast(g, av.shape)
        if _is_node(b):
            b.grad += _unbroadcast(g, bv.shape)

    out._backward = _bw
    return out


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    out_v = av - bv
    if not (_is_node(a) or _is_node(b)):
        return out_v
    out = Node(out_v, parents=tuple(x for x in (a, b) if _is_node(x)))

    def _bw(g):
        if _is_node(a):
            a.grad += _unbroadcast(g, av.shape)
        if _is_node(b):
            b.grad += _unbroadcast(-g, bv.shape)

    out._backward = _bw
    return out


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    out_v = av * bv
    if not (_is_node(a) or _is_node(b)):
        return out_v
    out = Node(out_v, parents=tuple(x for x in (a, b) if _is_node(x)))

    def _bw(g):
        if _is_node(a):
            a.grad += _unbroadcast(g * bv, av.shape)
        if _is_node(b):
            b.grad += _unbroadcast(g * av, bv.shape)

    out._backward = _bw
    return out


def div(a, b):
    av, bv = value_of(a), value_of(b)
    out_v = av / bv
    if not (_is_node(a) or _is_node(b)):
        return out_v
    out = Node(out_v, parents=tuple(x for x in (a, b) if _is_node(x)))

    def _bw(g):
        if _is_node(a):
            a.grad += _unbroadcast(g / bv, av.shape)
        if _is_node(b):
            b.grad += _unbroadcast(-g * av / (bv * bv), bv.shape)

    out._backward = _bw
    return out


def neg(a):
    if not _is_node(a):
        return -value_of(a)
    out = Node(-a.value, parents=(a,))

    def _bw(g):
        a.grad += -g

    out._backward = _bw
    return out


def pow(a, exponent):
    """Elementwise power with a constant exponent."""
    if not _is_node(a):
        return value_of(a) ** exponent
    out_v = a.value ** exponent
    out = Node(out_v, parents=(a,))

    def _bw(g):
        a.grad += g * exponent * a.value ** (exponent - 1)

    out._backward = _bw
    return out


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    out_v = av @ bv
    if not (_is_node(a) or _is_node(b)):
        return out_v
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise ValueError(f"matmul supports 1-D/2-D operands, got {av.ndim}-D @ {bv.ndim}-D")
    out = Node(out_v, parents=tuple(x for x in (a, b) if _is_node(x)))

    def _bw(g):
        g = np.asarray(g)
        if _is_node(a):
            if av.ndim == 2 and bv.ndim == 2:
                a.grad += g @ bv.T
            elif av.ndim == 2 and bv.ndim == 1:
                a.grad += np.outer(g, bv)
            elif av.ndim == 1 and bv.ndim == 2:
                a.grad += bv @ g
            else:  # 1-D @ 1-D
                a.grad += g * bv
        if _is_node(b):
            if av.ndim == 2 and bv.ndim == 2:
                b.grad += av.T @ g
            elif av.ndim == 2 and bv.ndim == 1:
                b.grad += av.T @ g
            elif av.ndim == 1 and bv.ndim == 2:
                b.grad += np.outer(av, g)
            else:
                b.grad += g * av

    out._backward = _bw
    return out


def transpose(a):
    if not _is_node(a):
        return value_of(a).T
    out = Node(a.value.T, parents=(a,))

    def _bw(g):
        a.grad += np.asarray(g).T

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

def exp(a):
    if not _is_node(a):
        return np.exp(value_of(a))
    out = Node(np.exp(a.value), parents=(a,))

    def _bw(g):
        a.grad += g * out.value

    out._backward = _bw
    return out


def log(a):
    if not _is_node(a):
        return np.log(value_of(a))
    out = Node(np.log(a.value), parents=(a,))

    def _bw(g):
        a.grad += g / a.value

    out._backward = _bw
    return out


def tanh(a):
    if not _is_node(a):
        return np.tanh(value_of(a))
    out = Node(np.tanh(a.value), parents=(a,))

    def _bw(g):
        a.grad += g * (1.0 - out.value * out.value)

    out._backward = _bw
    return out


def relu(a):
    if not _is_node(a):
        v = value_of(a)
        return np.maximum(v, 0.0)
    out = Node(np.maximum(a.value, 0.0), parents=(a,))

    def _bw(g):
        # subgradient 0 at the kink
        a.grad += g * (a.value > 0.0)

    out._backward = _bw
    return out


def _sigmoid_np(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out if out.ndim else out[()]


def sigmoid(a):
    if not _is_node(a):
        return _sigmoid_np(value_of(a))
    out = Node(_sigmoid_np(a.value), parents=(a,))

    def _bw(g):
        a.grad += g * out.value * (1.0 - out.value)

    out._backward = _bw
    return out


def _softplus_np(t):
    # max(t, 0) + log1p(exp(-|t|)): exact and overflow-free for |t| <= ~700
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def softplus(a):
    """log(1 + e^t), numerically stable for large |t|."""
    if not _is_node(a):
        return _softplus_np(value_of(a))
    out = Node(_softplus_np(a.value), parents=(a,))

    def _bw(g):
        a.grad += g * _sigmoid_np(a.value)

    out._backward = _bw
    return out


def softminus(a):
    """t - softplus(t), i.e. log sigmoid(t)."""
    if not _is_node(a):
        t = value_of(a)
        return t - _softplus_np(t)
    out = Node(a.value - _softplus_np(a.value), parents=(a,))

    def _bw(g):
        a.grad += g * _sigmoid_np(-a.value)

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------

def sum(a, axis=None, keepdims=False):
    if not _is_node(a):
        return np.sum(value_of(a), axis=axis, keepdims=keepdims)
    out = Node(np.sum(a.value, axis=axis, keepdims=keepdims), parents=(a,))

    def _bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.grad += np.broadcast_to(g, a.value.shape)

    out._backward = _bw
    return out


def mean(a, axis=None, keepdims=False):
    av = value_of(a)
    if axis is None:
        n = av.size
    else:
        n = av.shape[axis]
    return div(sum(a, axis=axis, keepdims=keepdims), float(n))


def concat(parts, axis=0):
    values = [value_of(p) for p in parts]
    out_v = np.concatenate(values, axis=axis)
    if not any(_is_node(p) for p in parts):
        return out_v
    out = Node(out_v, parents=tuple(p for p in parts if _is_node(p)))
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def _bw(g):
        for i, p in enumerate(parts):
            if _is_node(p):
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(offsets[i], offsets[i + 1])
                p.grad += g[tuple(sl)]

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def _topo_order(output: Node) -> list[Node]:
    """Reverse postorder over the graph; raises on a cycle (impossible for
    append-only graphs, checked anyway)."""
    order: list[Node] = []
    visited: set[int] = set()
    on_path: set[int] = set()
    stack: list[tuple[Node, bool]] = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        nid = id(node)
        if expanded:
            on_path.discard(nid)
            order.append(node)
            continue
        if nid in visited:
            continue
        visited.add(nid)
        on_path.add(nid)
        stack.append((node, True))
        for parent in node.parents:
            pid = id(parent)
            if pid in on_path:
                raise RuntimeError("cycle detected in computation graph")
            if pid not in visited:
                stack.append((parent, False))
    return order


def backward(output: Node) -> None:
    """Populate adjoints of every node reachable from a scalar output.

    Adjoints accumulate: leaves that should start from zero (e.g. persistent
    parameters) must be cleared with ``zero_grad`` beforehand.
    """
    if not isinstance(output, Node):
        raise TypeError("backward expects a Node")
    if output.value.size != 1:
        raise ValueError(f"backward expects a scalar output, got shape {output.value.shape}")
    output.grad = output.grad + np.ones_like(output.value)
    for node in reversed(_topo_order(output)):
        if node._backward is not None:
            node._backward(node.grad)


def gradients(output: Node, params) -> list[np.ndarray]:
    """Run a backward pass and return adjoint copies for `params`."""
    zero_grad(params)
    backward(output)
    return [np.array(p.grad, copy=True) for p in params]


def zero_grad(params) -> None:
    for p in params:
        p.grad = np.zeros_like(p.value)
