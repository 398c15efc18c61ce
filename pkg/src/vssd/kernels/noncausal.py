"""Non-causal scalar-A state space kernels.

The causal recurrence h(t) = A_t h(t-1) + B_t x(t) is rewritten so each
token's contribution is weighted only by its own per-token scalar m_t:
h(t) = h(t-1) + m_t B_t x(t).  Dropping the per-index bias term turns the
token-wise states into one global hidden state H = sum_j m_j B_j (x) x_j,
shared by every token, which collapses to two matrix products per head:
Y = C (B^T (X * m)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import DimensionError, Tensor, as_tensor, einsum2


class ConsistencyError(AssertionError):
    """An internal algebraic identity failed beyond tolerance."""


class RouteError(ValueError):
    """Scan route is not a bijection over token indices."""


@dataclass
class NcssdInputs:
    """One sequence of non-causal SSD inputs.

    X: (L, Hd, P); B, C: (L, N); m: (L, Hd) positive per-token weights.
    ``order`` carries each row's original token index so the global reduction
    can run in a canonical order after any scan-route permutation.
    """

    X: Tensor
    B: Tensor
    C: Tensor
    m: Tensor
    order: np.ndarray = None

    def __post_init__(self):
        self.X = as_tensor(self.X)
        self.B = as_tensor(self.B)
        self.C = as_tensor(self.C)
        self.m = as_tensor(self.m)
        L, Hd, _ = self.X.shape
        if self.B.ndim != 2 or self.B.shape[0] != L or self.C.shape != self.B.shape:
            raise DimensionError(f"B/C must be (L, N), got {self.B.shape} and {self.C.shape}")
        if self.m.shape != (L, Hd):
            raise DimensionError(f"m must be (L, Hd)={L, Hd}, got {self.m.shape}")
        if np.any(self.m.data <= 0):
            raise ValueError("m must be positive elementwise")
        if self.order is None:
            self.order = np.arange(L)
        else:
            self.order = np.asarray(self.order)
            if sorted(self.order.tolist()) != list(range(L)):
                raise RouteError("order must be a permutation of 0..L-1")

    @property
    def dims(self):
        L, Hd, P = self.X.shape
        return L, Hd, P, self.B.shape[1]


@dataclass
class ScanRoute:
    """Permutation in which a token sequence is visited."""

    perm: np.ndarray

    def __post_init__(self):
        self.perm = np.asarray(self.perm)
        if sorted(self.perm.tolist()) != list(range(len(self.perm))):
            raise RouteError(f"scan route must be a bijection over 0..{len(self.perm) - 1}")

    @staticmethod
    def identity(L):
        return ScanRoute(np.arange(L))

    @staticmethod
    def reverse(L):
        return ScanRoute(np.arange(L)[::-1].copy())

    @staticmethod
    def column_major(h, w):
        return ScanRoute(np.arange(h * w).reshape(h, w).T.reshape(-1))

    @staticmethod
    def transpose_raster(h, w):
        # placement convention: inverse of the column-major visit order;
        # coincides with column_major on square grids
        return ScanRoute.column_major(h, w).inverse()

    @staticmethod
    def random(L, rng):
        return ScanRoute(rng.permutation(L))

    def inverse(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return ScanRoute(inv)


def apply_scan_route(inp: NcssdInputs, route: ScanRoute) -> NcssdInputs:
    """Permute every per-token array (and the order bookkeeping) by the route."""
    p = route.perm
    if len(p) != inp.X.shape[0]:
        raise RouteError(f"route length {len(p)} != sequence length {inp.X.shape[0]}")
    key = p.tolist()
    return NcssdInputs(inp.X[key], inp.B[key], inp.C[key], inp.m[key], order=inp.order[p])


def ncssd_rewritten_recurrence(inp: NcssdInputs) -> Tensor:
    """Per-token states of the rewritten recurrence, (L, Hd, N, P).

    h(t) = h(t-1) + m_t B_t x(t); only the final state carries meaning in the
    non-causal form, the full trajectory is returned for verification.
    """
    L, Hd, P, N = inp.dims
    Z = einsum2("ln,lhp->lhnp", inp.B, inp.X)
    mZ = einsum2("lh,lhnp->lhnp", inp.m, Z)
    return _cumsum0(mZ)


def _cumsum0(t: Tensor) -> Tensor:
    data = np.cumsum(t.data, axis=0)

    def bwd(g):
        return (np.ascontiguousarray(np.cumsum(g[::-1], axis=0)[::-1]),)

    return Tensor._from_op(data, (t,), bwd)


def bidir_hidden_identity(inp: NcssdInputs, i: int, tol=1e-12):
    """Token i's bidirectional hidden state, checked against the closed form.

    Forward prefix through i plus backward prefix through i must equal the
    full sum plus the extra m_i Z_i term.  Returns the (Hd, N, P) state.
    """
    L, Hd, P, N = inp.dims
    if not 1 <= i <= L:
        raise DimensionError(f"token index {i} outside 1..{L}")
    Z = np.einsum("ln,lhp->lhnp", inp.B.data, inp.X.data)
    mZ = inp.m.data[:, :, None, None] * Z
    forward = mZ[:i].sum(axis=0)
    backward = mZ[i - 1 :].sum(axis=0)
    H_i = forward + backward
    closed = mZ.sum(axis=0) + mZ[i - 1]
    err = np.max(np.abs(H_i - closed))
    scale = max(1.0, np.max(np.abs(closed)))
    if err > tol * scale:
        raise ConsistencyError(f"bidirectional identity violated: max abs diff {err:.3e}")
    return H_i


def ncssd_hidden_state(inp: NcssdInputs) -> Tensor:
    """Global hidden state H = sum_j m_j B_j (x) x_j, (Hd, N, P).

    The reduction always runs in ascending original token order, so H is
    bitwise invariant under any scan-route permutation of the inputs.
    """
    canonical = np.argsort(inp.order, kind="stable")
    if np.array_equal(canonical, np.arange(len(canonical))):
        Xc, Bc, mc = inp.X, inp.B, inp.m  # already canonical, skip the copy
    else:
        key = canonical.tolist()
        Xc, Bc, mc = inp.X[key], inp.B[key], inp.m[key]
    mX = einsum2("lh,lhp->lhp", mc, Xc)
    return einsum2("ln,lhp->hnp", Bc, mX)


def ncssd_contraction(inp: NcssdInputs) -> Tensor:
    """Three-step contraction form, materializing the expanded Z explicitly.

    Z = expand(X, B): (L, Hd, N, P); H = contract(m, Z): (Hd, N, P);
    Y = contract(C, H): (L, Hd, P).
    """
    Z = einsum2("ln,lhp->lhnp", inp.B, inp.X)
    H = einsum2("lh,lhnp->hnp", inp.m, Z)
    return einsum2("ln,hnp->lhp", inp.C, H)


def ncssd_fused(inp: NcssdInputs) -> Tensor:
    """Fused form Y = C (B^T (X * m)): two contractions, no expanded state.

    The inner reduction runs through ncssd_hidden_state's canonical token
    order, so the output is exactly permutation-equivariant under scan-route
    changes: every token reads the same bitwise-identical H.
    """
    H = ncssd_hidden_state(inp)
    return einsum2("ln,hnp->lhp", inp.C, H)


def compute_m(x_tokens, w_delta, b_delta, a_log) -> Tensor:
    """Per-token per-head weight m = exp(softplus(x w + b) * (-exp(a_log))).

    x_tokens: (L, D); w_delta: (D, Hd); b_delta, a_log: (Hd,).  Always in
    (0, 1) since the softplus rate is positive and the decay negative.
    """
    x_tokens = as_tensor(x_tokens)
    w_delta, b_delta, a_log = as_tensor(w_delta), as_tensor(b_delta), as_tensor(a_log)
    L = x_tokens.shape[0]
    Hd = w_delta.shape[1]
    delta = einsum2("ld,dh->lh", x_tokens, w_delta) + _rowbias(b_delta, L)
    rate = delta.softplus()
    decay = -a_log.exp()
    return einsum2("lh,h->lh", rate, decay).exp()


def _rowbias(b: Tensor, L: int) -> Tensor:
    ones = Tensor(np.ones((L,), dtype=b.dtype))
    return einsum2("l,h->lh", ones, b)
