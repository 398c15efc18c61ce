"""Causal scalar-A state space kernels.

These are the reference forms the non-causal kernels are differenced against:
zero-order-hold discretization, the sequential recurrence, the masked
quadratic form, the direct matrix form, the time-invariant convolution kernel,
and the channel-split bidirectional variant.

All kernels accept Tensors (autodiff flows through when inputs require grad)
or plain arrays.  Shapes follow one sequence of L tokens split into Hd heads
of width P with state dimension N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import (
    DimensionError,
    Tensor,
    UnsupportedConfigError,
    as_tensor,
    concat,
    einsum2,
    stack,
)


class ParameterDomainError(ValueError):
    """Continuous parameters outside their valid domain."""


@dataclass
class ContinuousParams:
    """Continuous-time parameters before discretization.

    a_ring: (Hd,) negative scalar per head; b_ring: (L, N); delta: (L, Hd) > 0.
    """

    a_ring: np.ndarray
    b_ring: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        self.a_ring = np.asarray(self.a_ring, dtype=np.float64)
        self.b_ring = np.asarray(self.b_ring, dtype=np.float64)
        self.delta = np.asarray(self.delta, dtype=np.float64)
        if np.any(self.a_ring >= 0):
            raise ParameterDomainError("a_ring must be negative for every head")
        if np.any(self.delta <= 0):
            raise ParameterDomainError("delta must be positive elementwise")
        if self.delta.shape != (self.b_ring.shape[0], self.a_ring.shape[0]):
            raise DimensionError(
                f"delta shape {self.delta.shape} inconsistent with "
                f"b_ring {self.b_ring.shape} / a_ring {self.a_ring.shape}"
            )


def discretize_zoh(p: ContinuousParams, exact: bool = False):
    """Zero-order-hold discretization.

    Returns A (L, Hd) in (0, 1) and B (L, Hd, N).  The default uses the
    first-order approximation B = delta * b_ring; ``exact=True`` applies the
    full (delta a)^-1 (exp(delta a) - 1) delta factor for comparison only.
    """
    A = np.exp(p.delta * p.a_ring[None, :])
    if exact:
        factor = (A - 1.0) / p.a_ring[None, :]  # (L, Hd)
    else:
        factor = p.delta
    B = factor[:, :, None] * p.b_ring[:, None, :]
    return A, B


@dataclass
class SsdSequenceInputs:
    """One sequence of causal SSD inputs.

    X: (L, Hd, P); B, C: (L, N); A: (L, Hd) with 0 < A < 1.
    """

    X: Tensor
    B: Tensor
    C: Tensor
    A: Tensor

    def __post_init__(self):
        self.X = as_tensor(self.X)
        self.B = as_tensor(self.B)
        self.C = as_tensor(self.C)
        self.A = as_tensor(self.A)
        L, Hd, _ = self.X.shape
        if self.B.ndim != 2 or self.C.ndim != 2 or self.B.shape[0] != L or self.C.shape != self.B.shape:
            raise DimensionError(f"B/C must be (L, N), got {self.B.shape} and {self.C.shape}")
        if self.A.shape != (L, Hd):
            raise DimensionError(f"A must be (L, Hd)={L, Hd}, got {self.A.shape}")
        if np.any(self.A.data <= 0) or np.any(self.A.data >= 1):
            raise ParameterDomainError("A must lie strictly in (0, 1)")

    @property
    def dims(self):
        L, Hd, P = self.X.shape
        return L, Hd, P, self.B.shape[1]


def ssd_recurrent(inp: SsdSequenceInputs) -> Tensor:
    """Sequential scan: h(t) = A_t h(t-1) + B_t x(t), y(t) = C_t h(t)."""
    L, Hd, P, N = inp.dims
    h = Tensor(np.zeros((Hd, N, P), dtype=inp.X.dtype))
    ys = []
    for t in range(L):
        inc = einsum2("n,hp->hnp", inp.B[t], inp.X[t])
        h = einsum2("h,hnp->hnp", inp.A[t], h) + inc
        ys.append(einsum2("n,hnp->hp", inp.C[t], h))
    return stack(ys, axis=0)


def build_mask_M(A) -> np.ndarray:
    """Lower-triangular cumulative-product mask, (Hd, L, L) per head.

    M[h, i, j] = prod_{k=j+1..i} A[k, h] for i > j, 1 on the diagonal,
    exact 0 above it.
    """
    A = A.data if isinstance(A, Tensor) else np.asarray(A)
    L, Hd = A.shape
    M = np.zeros((Hd, L, L), dtype=A.dtype)
    idx = np.arange(L)
    M[:, idx, idx] = 1.0
    for i in range(1, L):
        # row recurrence: M[i, j] = A_i * M[i-1, j] for j < i
        M[:, i, :i] = A[i][:, None] * M[:, i - 1, :i]
    return M


def ssd_quadratic(inp: SsdSequenceInputs) -> Tensor:
    """Masked quadratic form: Y = (M * (C B^T)) X per head."""
    L, Hd, P, N = inp.dims
    M = Tensor(build_mask_M(inp.A))
    G = einsum2("in,jn->ij", inp.C, inp.B)  # (L, L)
    F = einsum2("hij,ij->hij", M, G)
    return einsum2("hij,jhp->ihp", F, inp.X)


def ssd_matrix_form(inp: SsdSequenceInputs) -> np.ndarray:
    """Direct matrix form F[h, j, i] = C_j^T A_{j:i} B_i (i <= j), else 0.

    Built row by row from reversed cumulative products of A, independently of
    build_mask_M's multiplicative recurrence.  Returns a plain array.
    """
    L, Hd, P, N = inp.dims
    A = inp.A.data
    B = inp.B.data
    C = inp.C.data
    G = C @ B.T  # G[j, i] = C_j . B_i
    F = np.zeros((Hd, L, L), dtype=A.dtype)
    for j in range(L):
        # prods[i] = prod_{k=i+1..j} A_k for i <= j
        prods = np.ones((j + 1, Hd), dtype=A.dtype)
        if j > 0:
            prods[:j] = np.cumprod(A[j:0:-1], axis=0)[::-1]
        F[:, j, : j + 1] = (G[j, : j + 1, None] * prods).T
    return F


def apply_matrix_form(F: np.ndarray, X) -> np.ndarray:
    X = X.data if isinstance(X, Tensor) else np.asarray(X)
    return np.einsum("hji,ihp->jhp", F, X)


def lti_conv_kernel(A: float, B, C, L: int) -> np.ndarray:
    """Global convolution kernel K = (CB, CAB, ..., C A^{L-1} B)."""
    B = np.asarray(B, dtype=np.float64).reshape(-1)
    C = np.asarray(C, dtype=np.float64).reshape(-1)
    return float(C @ B) * float(A) ** np.arange(L)


def lti_conv_apply(x, K) -> np.ndarray:
    """Causal convolution of a scalar sequence with K."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return np.convolve(x, K)[: x.shape[0]]


def bi_ssd(inp: SsdSequenceInputs) -> Tensor:
    """Channel-split bidirectional scan.

    The first half of each head's channels runs the forward recurrence, the
    second half runs it on token-reversed inputs (output un-reversed), and the
    halves are concatenated.
    """
    L, Hd, P, N = inp.dims
    if P % 2 != 0:
        raise UnsupportedConfigError(f"bi_ssd needs an even head width, got P={P}")
    half = P // 2
    fwd = ssd_recurrent(SsdSequenceInputs(inp.X[:, :, :half], inp.B, inp.C, inp.A))
    rev = SsdSequenceInputs(
        inp.X[:, :, half:].flip(0), inp.B.flip(0), inp.C.flip(0), inp.A.flip(0)
    )
    bwd = ssd_recurrent(rev).flip(0)
    return concat([fwd, bwd], axis=2)
