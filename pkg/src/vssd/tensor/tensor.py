"""Dense tensors with reverse-mode automatic differentiation.

Tensors wrap row-major contiguous numpy arrays (float32 or float64 only).
Every differentiable op records its parents and a backward closure; calling
``backward`` on a scalar loss walks the recorded graph in reverse topological
order and accumulates gradients into every reachable ``requires_grad`` leaf.

Elementwise ops require exactly matching shapes -- the only broadcasting
allowed anywhere in the public API is python-scalar with tensor.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

SUPPORTED_DTYPES = (np.float32, np.float64)

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


class DimensionError(ValueError):
    """Shape or dtype mismatch between operands."""


class UnsupportedConfigError(ValueError):
    """Operation asked for a configuration it does not support."""


class EvaluationError(RuntimeError):
    """An evaluation produced a non-finite result where finiteness is required."""


def _as_array(data, dtype=None):
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype not in SUPPORTED_DTYPES:
        arr = arr.astype(np.float64)
    return np.ascontiguousarray(arr)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def zeros(shape, dtype=np.float64, requires_grad=False):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)

    @staticmethod
    def ones(shape, dtype=np.float64, requires_grad=False):
        return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)

    @staticmethod
    def _from_op(data, parents, backward):
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- basic properties -----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data.copy())

    def astype(self, dtype):
        x = self
        data = x.data.astype(dtype)

        def bwd(g):
            return (g.astype(x.dtype),)

        return Tensor._from_op(data, (x,), bwd)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    # -- autodiff driver ------------------------------------------------------

    def backward(self, grad=None):
        """Accumulate gradients of this (scalar) value into requires_grad leaves."""
        if grad is None:
            if self.size != 1:
                raise DimensionError(
                    f"backward() without an explicit gradient needs a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): grad}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    def zero_grad(self):
        self.grad = None

    # -- elementwise arithmetic -----------------------------------------------

    def _check_binary(self, other):
        if isinstance(other, Tensor):
            if other.shape != self.shape:
                raise DimensionError(
                    f"elementwise op needs equal shapes, got {self.shape} vs {other.shape}"
                )
            if other.dtype != self.dtype:
                raise DimensionError(
                    f"elementwise op needs equal dtypes, got {self.dtype} vs {other.dtype}"
                )
            return other
        if np.isscalar(other):
            return None
        raise DimensionError(f"unsupported operand type {type(other)!r}")

    def __add__(self, other):
        o = self._check_binary(other)
        if o is None:
            x = self
            return Tensor._from_op(x.data + other, (x,), lambda g: (g,))
        return Tensor._from_op(self.data + o.data, (self, o), lambda g: (g, g))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._check_binary(other)
        if o is None:
            x = self
            return Tensor._from_op(x.data - other, (x,), lambda g: (g,))
        return Tensor._from_op(self.data - o.data, (self, o), lambda g: (g, -g))

    def __rsub__(self, other):
        o = self._check_binary(other)
        if o is None:
            return Tensor._from_op(other - self.data, (self,), lambda g: (-g,))
        raise DimensionError("tensor __rsub__ only supports scalars")

    def __mul__(self, other):
        o = self._check_binary(other)
        if o is None:
            x = self
            return Tensor._from_op(x.data * other, (x,), lambda g: (g * other,))
        a, b = self, o
        return Tensor._from_op(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._check_binary(other)
        if o is None:
            x = self
            inv = 1.0 / other
            return Tensor._from_op(x.data * inv, (x,), lambda g: (g * inv,))
        a, b = self, o
        data = a.data / b.data

        def bwd(g):
            return (g / b.data, -g * data / b.data)

        return Tensor._from_op(data, (a, b), bwd)

    def __neg__(self):
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, p):
        if not np.isscalar(p):
            raise DimensionError("only constant exponents are supported")
        x = self
        data = x.data ** p

        def bwd(g):
            return (g * p * x.data ** (p - 1),)

        return Tensor._from_op(data, (x,), bwd)

    # -- elementwise functions --------------------------------------------------

    def exp(self):
        x = self
        data = np.exp(x.data)
        return Tensor._from_op(data, (x,), lambda g: (g * data,))

    def log(self):
        x = self
        return Tensor._from_op(np.log(x.data), (x,), lambda g: (g / x.data,))

    def sqrt(self):
        x = self
        data = np.sqrt(x.data)
        return Tensor._from_op(data, (x,), lambda g: (g * (0.5 / data),))

    def sigmoid(self):
        x = self
        data = _sigmoid(x.data)
        return Tensor._from_op(data, (x,), lambda g: (g * data * (1.0 - data),))

    def softplus(self):
        x = self
        data = np.logaddexp(np.zeros((), dtype=x.dtype), x.data)
        return Tensor._from_op(data, (x,), lambda g: (g * _sigmoid(x.data),))

    def silu(self):
        x = self
        s = _sigmoid(x.data)
        data = x.data * s
        return Tensor._from_op(data, (x,), lambda g: (g * (s + data * (1.0 - s)),))

    def gelu(self):
        x = self
        phi = 0.5 * (1.0 + _erf(x.data * _INV_SQRT2))
        data = x.data * phi

        def bwd(g):
            pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
            return (g * (phi + x.data * pdf),)

        return Tensor._from_op(data, (x,), bwd)

    # -- reductions / reshaping -------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        x = self
        data = np.sum(x.data, axis=axis, keepdims=keepdims)

        def bwd(g):
            if axis is None:
                return (np.broadcast_to(g, x.shape).copy(),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, x.shape).copy(),)

        return Tensor._from_op(np.asarray(data), (x,), bwd)

    def mean(self, axis=None, keepdims=False):
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        x = self
        data = np.ascontiguousarray(x.data.reshape(shape))
        return Tensor._from_op(data, (x,), lambda g: (g.reshape(x.shape),))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        x = self
        inv = np.argsort(axes)
        data = np.ascontiguousarray(x.data.transpose(axes))
        return Tensor._from_op(data, (x,), lambda g: (np.ascontiguousarray(g.transpose(inv)),))

    def __getitem__(self, key):
        x = self
        data = np.ascontiguousarray(x.data[key])

        def bwd(g):
            gx = np.zeros_like(x.data)
            # np.add.at accumulates over repeated indices where += would not
            np.add.at(gx, key, g)
            return (gx,)

        return Tensor._from_op(data, (x,), bwd)

    def flip(self, axis):
        x = self
        data = np.ascontiguousarray(np.flip(x.data, axis=axis))
        return Tensor._from_op(data, (x,), lambda g: (np.ascontiguousarray(np.flip(g, axis=axis)),))

    # -- contractions -------------------------------------------------------------

    def __matmul__(self, other):
        return matmul(self, other)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def as_tensor(x, dtype=None):
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def matmul(a, b):
    """Stacked matrix product: (..., M, K) @ (..., K, N) with equal leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.dtype != b.dtype:
        raise DimensionError(f"matmul dtype mismatch: {a.dtype} vs {b.dtype}")
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    data = np.matmul(a.data, b.data)

    def bwd(g):
        ga = np.matmul(g, b.data.swapaxes(-1, -2))
        gb = np.matmul(a.data.swapaxes(-1, -2), g)
        return (ga, gb)

    return Tensor._from_op(data, (a, b), bwd)


def _parse_einsum2(spec):
    lhs, out = spec.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    for term in (sa, sb, out):
        if len(set(term)) != len(term):
            raise DimensionError(f"einsum2 does not support repeated indices in one term: {spec!r}")
    for ch in sa:
        if ch not in sb and ch not in out:
            raise DimensionError(f"einsum2 index {ch!r} summed within a single operand: {spec!r}")
    for ch in sb:
        if ch not in sa and ch not in out:
            raise DimensionError(f"einsum2 index {ch!r} summed within a single operand: {spec!r}")
    return sa, sb, out


def einsum2(spec, a, b):
    """Two-operand einsum with autodiff (each index must appear in >= 2 terms)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.dtype != b.dtype:
        raise DimensionError(f"einsum2 dtype mismatch: {a.dtype} vs {b.dtype}")
    sa, sb, out = _parse_einsum2(spec)
    data = np.einsum(f"{sa},{sb}->{out}", a.data, b.data)

    def bwd(g):
        ga = np.einsum(f"{out},{sb}->{sa}", g, b.data)
        gb = np.einsum(f"{out},{sa}->{sb}", g, a.data)
        return (ga, gb)

    return Tensor._from_op(data, (a, b), bwd)


def add_rowvec(x, b):
    """x + b with b broadcast over all leading axes (b matches the last axis)."""
    x, b = as_tensor(x), as_tensor(b)
    if b.ndim != 1 or b.shape[0] != x.shape[-1]:
        raise DimensionError(f"add_rowvec needs b of shape ({x.shape[-1]},), got {b.shape}")
    data = x.data + b.data

    def bwd(g):
        return (g, np.sum(g, axis=tuple(range(g.ndim - 1))))

    return Tensor._from_op(data, (x, b), bwd)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        slicer = [slice(None)] * g.ndim
        grads = []
        for i in range(len(tensors)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(np.ascontiguousarray(g[tuple(slicer)]))
        return tuple(grads)

    return Tensor._from_op(data, tuple(tensors), bwd)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        return tuple(np.ascontiguousarray(np.take(g, i, axis=axis)) for i in range(len(tensors)))

    return Tensor._from_op(data, tuple(tensors), bwd)


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / np.sum(e, axis=axis, keepdims=True)

    def bwd(g):
        dot = np.sum(g * data, axis=axis, keepdims=True)
        return ((g - dot) * data,)

    return Tensor._from_op(data, (x,), bwd)


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    data = shifted - lse
    sm = np.exp(data)

    def bwd(g):
        return (g - sm * np.sum(g, axis=axis, keepdims=True),)

    return Tensor._from_op(data, (x,), bwd)


def elementwise(op, *args):
    """Named elementwise dispatch: add, sub, mul, exp, softplus, silu, gelu."""
    table = {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": lambda a, b: a * b,
        "exp": lambda a: as_tensor(a).exp(),
        "softplus": lambda a: as_tensor(a).softplus(),
        "silu": lambda a: as_tensor(a).silu(),
        "gelu": lambda a: as_tensor(a).gelu(),
    }
    if op not in table:
        raise UnsupportedConfigError(f"unknown elementwise op {op!r}")
    args = [as_tensor(a) if not np.isscalar(a) else a for a in args]
    return table[op](*args)


def layer_norm(x, gamma, beta, eps=1e-6):
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if eps <= 0:
        raise UnsupportedConfigError("layer_norm eps must be positive")
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"layer_norm affine params must have shape ({c},)")
    mu = np.mean(x.data, axis=-1, keepdims=True)
    var = np.var(x.data, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gamma.data + beta.data

    def bwd(g):
        gg = g * gamma.data
        m1 = np.mean(gg, axis=-1, keepdims=True)
        m2 = np.mean(gg * xhat, axis=-1, keepdims=True)
        gx = (gg - m1 - xhat * m2) * inv
        axes = tuple(range(g.ndim - 1))
        return (gx, np.sum(g * xhat, axis=axes), np.sum(g, axis=axes))

    return Tensor._from_op(data, (x, gamma, beta), bwd)


def _windows(xp, k, stride):
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    if stride != 1:
        win = win[:, :, ::stride, ::stride]
    return win


def conv2d(x, w, bias=None, stride=1, pad=0):
    """2-D cross-correlation: x (B,Cin,H,W), w (Cout,Cin,k,k)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d needs 4-D input and weight, got {x.shape}, {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape} vs weight {w.shape}")
    k = w.shape[2]
    if w.shape[3] != k:
        raise UnsupportedConfigError("conv2d kernels must be square")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    win = _windows(xp, k, stride)
    data = np.einsum("bchwij,ocij->bohw", win, w.data)
    parents = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        data = data + bias.data[None, :, None, None]
        parents.append(bias)
    ho, wo = data.shape[2], data.shape[3]

    def bwd(g):
        gw = np.einsum("bchwij,bohw->ocij", win, g)
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i : i + ho * stride : stride, j : j + wo * stride : stride] += np.einsum(
                    "bohw,oc->bchw", g, w.data[:, :, i, j]
                )
        gx = gxp[:, :, pad : xp.shape[2] - pad, pad : xp.shape[3] - pad] if pad else gxp
        grads = [np.ascontiguousarray(gx), gw]
        if bias is not None:
            grads.append(np.sum(g, axis=(0, 2, 3)))
        return tuple(grads)

    return Tensor._from_op(np.ascontiguousarray(data), tuple(parents), bwd)


def dwconv2d(x, w, pad=None):
    """Per-channel 2-D cross-correlation: x (B,C,H,W), w (C,k,k), same-size output."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 3:
        raise DimensionError(f"dwconv2d needs x rank 4 and w rank 3, got {x.shape}, {w.shape}")
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"dwconv2d channel mismatch: {x.shape} vs {w.shape}")
    k = w.shape[1]
    if w.shape[2] != k:
        raise UnsupportedConfigError("dwconv2d kernels must be square")
    if k % 2 == 0:
        raise UnsupportedConfigError(f"dwconv2d needs an odd kernel, got k={k}")
    if pad is None:
        pad = (k - 1) // 2
    if pad != (k - 1) // 2:
        raise UnsupportedConfigError("dwconv2d requires pad=(k-1)/2 for same-size output")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = _windows(xp, k, 1)
    data = np.einsum("bchwij,cij->bchw", win, w.data)
    h, wd = data.shape[2], data.shape[3]

    def bwd(g):
        gw = np.einsum("bchwij,bchw->cij", win, g)
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i : i + h, j : j + wd] += g * w.data[:, i, j][None, :, None, None]
        gx = gxp[:, :, pad : pad + h, pad : pad + wd]
        return (np.ascontiguousarray(gx), gw)

    return Tensor._from_op(np.ascontiguousarray(data), (x, w), bwd)
