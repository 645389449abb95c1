"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` records its parents and a backward closure; calling
``backward()`` on a scalar output accumulates gradients through the tape
in reverse topological order.  The op set is deliberately small (matmul,
elementwise arithmetic and transcendentals, reductions, concat/slice,
masked select) so that every gradient can be validated against central
differences.

Module-level helpers (``sqrt``, ``tanh``, ``where``, ...) dispatch on the
argument type, which lets the geometric formulas in :mod:`curvspec.stereo`
run unchanged on plain arrays or on tape nodes.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Array node on the differentiation tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    # -- bookkeeping -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return self.transpose()

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def _accumulate(self, grad):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                topo.append(node)
                continue
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g, self.data.shape))
            other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor(self.data + other.data, parents=(self, other), backward=bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g):
            self._accumulate(-g)

        return Tensor(-self.data, parents=(self,), backward=bwd)

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor(self.data * other.data, parents=(self, other), backward=bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            other._accumulate(
                _unbroadcast(-g * self.data / other.data**2, other.data.shape)
            )

        return Tensor(self.data / other.data, parents=(self, other), backward=bwd)

    def __rtruediv__(self, other):
        return _wrap(other) / self

    def __pow__(self, exponent):
        if not np.isscalar(exponent):
            raise TypeError("only scalar exponents are supported")

        def bwd(g):
            self._accumulate(g * exponent * self.data ** (exponent - 1))

        return Tensor(self.data**exponent, parents=(self,), backward=bwd)

    def __matmul__(self, other):
        other = _wrap(other)

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        return Tensor(self.data @ other.data, parents=(self, other), backward=bwd)

    def __rmatmul__(self, other):
        return _wrap(other) @ self

    def __getitem__(self, idx):
        def bwd(g):
            full = np.zeros_like(self.data)
            np.add.at(full, idx, g)
            self._accumulate(full)

        return Tensor(self.data[idx], parents=(self,), backward=bwd)

    def transpose(self):
        def bwd(g):
            self._accumulate(g.T)

        return Tensor(self.data.T, parents=(self,), backward=bwd)

    def reshape(self, *shape):
        old = self.data.shape

        def bwd(g):
            self._accumulate(g.reshape(old))

        return Tensor(self.data.reshape(*shape), parents=(self,), backward=bwd)

    # -- reductions ---------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def bwd(g):
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())
                return
            gg = g if keepdims else np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(gg, self.data.shape).copy())

        return Tensor(
            self.data.sum(axis=axis, keepdims=keepdims),
            parents=(self,),
            backward=bwd,
        )

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / count

    # -- elementwise transcendentals -----------------------------------

    def _unary(self, fn, dfn):
        out_data = fn(self.data)

        def bwd(g):
            self._accumulate(g * dfn(self.data, out_data))

        return Tensor(out_data, parents=(self,), backward=bwd)

    def exp(self):
        return self._unary(np.exp, lambda x, y: y)

    def log(self):
        return self._unary(np.log, lambda x, y: 1.0 / x)

    def sqrt(self):
        return self._unary(np.sqrt, lambda x, y: 0.5 / y)

    def tanh(self):
        return self._unary(np.tanh, lambda x, y: 1.0 - y**2)

    def arctanh(self):
        return self._unary(np.arctanh, lambda x, y: 1.0 / (1.0 - x**2))

    def tan(self):
        return self._unary(np.tan, lambda x, y: 1.0 + y**2)

    def arctan(self):
        return self._unary(np.arctan, lambda x, y: 1.0 / (1.0 + x**2))

    def sin(self):
        return self._unary(np.sin, lambda x, y: np.cos(x))

    def cos(self):
        return self._unary(np.cos, lambda x, y: -np.sin(x))

    def sigmoid(self):
        return self._unary(
            lambda x: 1.0 / (1.0 + np.exp(-x)), lambda x, y: y * (1.0 - y)
        )

    def softplus(self):
        return self._unary(
            lambda x: np.logaddexp(0.0, x), lambda x, y: 1.0 / (1.0 + np.exp(-x))
        )


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- dispatch helpers: identical code paths for ndarray and Tensor -----


def is_tensor(x) -> bool:
    return isinstance(x, Tensor)


def data_of(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=float)


def sqrt(x):
    return x.sqrt() if is_tensor(x) else np.sqrt(x)


def exp(x):
    return x.exp() if is_tensor(x) else np.exp(x)


def log(x):
    return x.log() if is_tensor(x) else np.log(x)


def tanh(x):
    return x.tanh() if is_tensor(x) else np.tanh(x)


def arctanh(x):
    return x.arctanh() if is_tensor(x) else np.arctanh(x)


def tan(x):
    return x.tan() if is_tensor(x) else np.tan(x)


def arctan(x):
    return x.arctan() if is_tensor(x) else np.arctan(x)


def sin(x):
    return x.sin() if is_tensor(x) else np.sin(x)


def cos(x):
    return x.cos() if is_tensor(x) else np.cos(x)


def sigmoid(x):
    return x.sigmoid() if is_tensor(x) else 1.0 / (1.0 + np.exp(-x))


def softplus(x):
    return x.softplus() if is_tensor(x) else np.logaddexp(0.0, x)


def sum_(x, axis=None, keepdims=False):
    return (
        x.sum(axis=axis, keepdims=keepdims)
        if is_tensor(x)
        else np.sum(x, axis=axis, keepdims=keepdims)
    )


def matmul(a, b):
    if is_tensor(a) or is_tensor(b):
        return _wrap(a) @ _wrap(b)
    return a @ b


def where(mask, a, b):
    """Select by a raw boolean mask; the mask is constant to the tape."""
    mask = np.asarray(mask, dtype=bool)
    if not (is_tensor(a) or is_tensor(b)):
        return np.where(mask, a, b)
    a, b = _wrap(a), _wrap(b)

    def bwd(g):
        a._accumulate(_unbroadcast(np.where(mask, g, 0.0), a.data.shape))
        b._accumulate(_unbroadcast(np.where(mask, 0.0, g), b.data.shape))

    return Tensor(np.where(mask, a.data, b.data), parents=(a, b), backward=bwd)


def concat(parts, axis=0):
    parts = list(parts)
    if not any(is_tensor(p) for p in parts):
        return np.concatenate(parts, axis=axis)
    parts = [_wrap(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, a, b in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(a, b)
            p._accumulate(g[tuple(sl)])

    return Tensor(
        np.concatenate([p.data for p in parts], axis=axis),
        parents=tuple(parts),
        backward=bwd,
    )


def softmax(x, axis=-1):
    """Numerically stable softmax; the max shift is constant to the tape."""
    shift = data_of(x).max(axis=axis, keepdims=True)
    e = exp(x - shift)
    return e / sum_(e, axis=axis, keepdims=True)


def logsumexp(x, axis=-1, keepdims=False):
    shift = data_of(x).max(axis=axis, keepdims=True)
    s = log(sum_(exp(x - shift), axis=axis, keepdims=True)) + shift
    if not keepdims:
        idx = [slice(None)] * s.ndim
        idx[axis] = 0
        return s[tuple(idx)]
    return s
