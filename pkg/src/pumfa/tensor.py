"""Minimal define-by-run tensor engine with reverse-mode differentiation.

Tensors wrap dense row-major numpy arrays (float32 by default; ops preserve
the dtype of their inputs, so float64 graphs work for verification). Each op
records its parents and a closure that routes the output gradient back to
them; ``backward`` runs the closures in reverse topological order.
"""

import threading
from contextlib import contextmanager

import numpy as np

DEFAULT_DTYPE = np.float32

# per-thread so pool workers running inference don't toggle tracking
# for each other (a shared flag races on the save/restore in no_grad)
_grad_state = threading.local()


def _grad_on():
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph construction inside the block (pure inference)."""
    prev = _grad_on()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = prev


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def _as_array(values, dtype=None):
    arr = np.asarray(values)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if not np.issubdtype(arr.dtype, np.floating):
        return arr.astype(DEFAULT_DTYPE)
    return arr


class Tensor:
    """Dense array node of a reverse-mode computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad) and _grad_on()
        self._parents = ()
        self._backward = None

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def is_leaf(self):
        return not self._parents

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- gradient plumbing ---------------------------------------------

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_coerce(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def _make(data, parents, backward_fn):
    """Wrap an op result; track the graph only when some parent needs it."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    needs = _grad_on() and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out._parents = parents
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _coerce(x, like):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _unbroadcast(g, shape):
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, extent in enumerate(shape):
        if extent == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- arithmetic ---------------------------------------------------------


def add(a, b):
    b = _coerce(b, a)
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bw)


def sub(a, b):
    b = _coerce(b, a)
    out_data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), bw)


def mul(a, b):
    b = _coerce(b, a)
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bw)


def neg(a):
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(-g)

    return _make(-a.data, (a,), bw)


def matmul(a, b):
    """Matrix product for 2-D operands or stacked 3-D operands."""
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(
            f"matmul inner extents differ: {a.data.shape} x {b.data.shape}"
        )
    out_data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))

    return _make(out_data, (a, b), bw)


# -- elementwise nonlinearities ------------------------------------------


def relu(a):
    mask = a.data > 0
    out_data = np.where(mask, a.data, 0)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * mask)

    return _make(out_data, (a,), bw)


def exp(a):
    out_data = np.exp(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * out_data)

    return _make(out_data, (a,), bw)


def power(a, exponent):
    """Elementwise x**c for a python-scalar exponent."""
    out_data = a.data**exponent

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * exponent * a.data ** (exponent - 1))

    return _make(out_data, (a,), bw)


def sqrt(a):
    """Elementwise square root; subgradient 0 where the input is 0."""
    out_data = np.sqrt(a.data)

    def bw(g):
        if a.requires_grad:
            denom = 2.0 * out_data
            ga = np.zeros_like(a.data)
            nz = out_data > 0
            ga[nz] = g[nz] / denom[nz]
            a.accumulate_grad(ga)

    return _make(out_data, (a,), bw)


# -- reductions -----------------------------------------------------------


def tsum(a, axis=None, keepdims=False):
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate_grad(np.broadcast_to(g, a.data.shape))
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a.accumulate_grad(np.broadcast_to(g, a.data.shape))

    return _make(out_data, (a,), bw)


def tmean(a, axis=None, keepdims=False):
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]
    return mul(tsum(a, axis, keepdims), 1.0 / count)


def tmin(a, axis):
    """Minimum along ``axis``; gradient routes to the first minimizer."""
    idx = np.argmin(a.data, axis=axis)
    out_data = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis).squeeze(axis)

    def bw(g):
        if not a.requires_grad:
            return
        ga = np.zeros_like(a.data)
        np.put_along_axis(ga, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
        a.accumulate_grad(ga)

    return _make(out_data, (a,), bw)


def softmax(a, axis):
    """Numerically stabilized softmax along ``axis``."""
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"softmax axis {axis} out of range for shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        if a.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            a.accumulate_grad(out_data * (g - inner))

    return _make(out_data, (a,), bw)


# -- shape manipulation ----------------------------------------------------


def reshape(a, shape):
    out_data = a.data.reshape(shape)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.data.shape))

    return _make(out_data, (a,), bw)


def transpose(a, axes):
    out_data = a.data.transpose(axes)
    inv = np.argsort(axes)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g.transpose(inv))

    return _make(out_data, (a,), bw)


def gather(a, index):
    """Select rows of ``a`` by an integer index array (axis 0).

    With ``a`` of shape (N, F) and ``index`` of shape (M, k), the result has
    shape (M, k, F); duplicated indices accumulate their gradients.
    """
    index = np.asarray(index)
    out_data = a.data[index]

    def bw(g):
        if a.requires_grad:
            # sort-and-segment-sum scatter: much faster than np.add.at
            flat_idx = index.reshape(-1)
            flat_g = np.ascontiguousarray(g).reshape(flat_idx.size, -1)
            order = np.argsort(flat_idx, kind="stable")
            sorted_idx = flat_idx[order]
            starts = np.flatnonzero(
                np.concatenate(([True], sorted_idx[1:] != sorted_idx[:-1]))
            )
            sums = np.add.reduceat(flat_g[order], starts, axis=0)
            ga = np.zeros_like(a.data).reshape(a.data.shape[0], -1)
            ga[sorted_idx[starts]] = sums
            a.accumulate_grad(ga.reshape(a.data.shape))

    return _make(out_data, (a,), bw)


# -- backward ---------------------------------------------------------------


def backward(loss, seed=1.0):
    """Populate ``grad`` for every tensor ``loss`` depends on.

    ``loss`` must hold a single value. Repeated calls without zeroing
    accumulate into existing gradients. Gradients of interior nodes are
    released once consumed; leaves keep theirs.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss.accumulate_grad(np.full_like(loss.data, seed))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            node.grad = None  # interior grads are transient


def parameter(data, dtype=None):
    """Leaf tensor that collects gradients."""
    return Tensor(data, requires_grad=True, dtype=dtype)
