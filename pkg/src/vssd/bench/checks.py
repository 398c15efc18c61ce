"""Correctness suites: kernel equivalences, invariances, masks, gradients.

Each suite runs a batch of randomized instances and reports its worst error.
Setting VSSD_FAULT_INJECT=mask flips the sign of one mask entry inside the
mask suite, a hook for verifying that the suites actually detect faults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..tensor import Tensor
from ..tensor.rng import Rng
from ..tensor.gradcheck import grad_check
from ..kernels.reference import (
    SsdSequenceInputs,
    apply_matrix_form,
    bi_ssd,
    build_mask_M,
    lti_conv_apply,
    lti_conv_kernel,
    ssd_matrix_form,
    ssd_quadratic,
    ssd_recurrent,
)
from ..kernels.noncausal import (
    NcssdInputs,
    ScanRoute,
    apply_scan_route,
    ncssd_contraction,
    ncssd_fused,
    ncssd_hidden_state,
    ncssd_rewritten_recurrence,
)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst_err: float
    tolerance: float
    instances: int
    seed: int
    detail: str = ""


def _random_causal(rng, L, Hd, P, N):
    X = rng.normal((L, Hd, P))
    B = rng.normal((L, N))
    C = rng.normal((L, N))
    A = 0.05 + 0.9 * rng.uniform((L, Hd))
    return SsdSequenceInputs(X, B, C, A)


def _random_noncausal(rng, L, Hd, P, N):
    X = rng.normal((L, Hd, P))
    B = rng.normal((L, N))
    C = rng.normal((L, N))
    m = 0.05 + 0.9 * rng.uniform((L, Hd))
    return NcssdInputs(X, B, C, m)


def suite_equivalence(seed=0, instances=40, tol=1e-10):
    """Recurrent == quadratic == matrix causal forms."""
    rng = Rng(seed)
    worst = 0.0
    for _ in range(instances):
        L = int(rng.integers(1, 33, ())) if instances > 10 else 16
        Hd = int(rng.integers(1, 4, ()))
        P = int(rng.integers(1, 9, ()))
        N = int(rng.integers(1, 17, ()))
        inp = _random_causal(rng, L, Hd, P, N)
        y_rec = ssd_recurrent(inp).data
        y_quad = ssd_quadratic(inp).data
        y_mat = apply_matrix_form(ssd_matrix_form(inp), inp.X)
        worst = max(worst, float(np.max(np.abs(y_rec - y_quad))),
                    float(np.max(np.abs(y_rec - y_mat))))
    return SuiteResult("equivalence", worst <= tol, worst, tol, instances, seed)


def suite_lti(seed=0, instances=20, tol=1e-12):
    """Constant-parameter recurrence equals convolution with K."""
    rng = Rng(seed)
    worst = 0.0
    for _ in range(instances):
        L = int(rng.integers(2, 129, ()))
        N = int(rng.integers(1, 9, ()))
        a = float(0.05 + 0.9 * rng.uniform(()))
        B = rng.normal((N,))
        C = rng.normal((N,))
        x = rng.normal((L,))
        K = lti_conv_kernel(a, B, C, L)
        y_conv = lti_conv_apply(x, K)
        inp = SsdSequenceInputs(
            x.reshape(L, 1, 1), np.tile(B, (L, 1)), np.tile(C, (L, 1)),
            np.full((L, 1), a),
        )
        y_rec = ssd_recurrent(inp).data.reshape(-1)
        worst = max(worst, float(np.max(np.abs(y_conv - y_rec))))
    return SuiteResult("lti", worst <= tol, worst, tol, instances, seed)


def suite_mask(seed=0, instances=20, tol=1e-12):
    """Mask structure: unit diagonal, exact zeros above, product recurrence."""
    rng = Rng(seed)
    worst = 0.0
    inject = os.environ.get("VSSD_FAULT_INJECT", "") == "mask"
    for k in range(instances):
        L = int(rng.integers(2, 33, ()))
        Hd = int(rng.integers(1, 4, ()))
        A = 0.05 + 0.9 * rng.uniform((L, Hd))
        M = build_mask_M(Tensor(A))
        if inject and k == 0:
            M = M.copy()
            M[0, 1, 0] = -M[0, 1, 0]
        idx = np.arange(L)
        worst = max(worst, float(np.max(np.abs(M[:, idx, idx] - 1.0))))
        upper = np.triu(np.ones((L, L)), k=1).astype(bool)
        worst = max(worst, float(np.max(np.abs(M[:, upper]))))
        # independent oracle: explicit product over each interval
        for h in range(Hd):
            for j in range(L):
                for i in range(j):
                    prod = float(np.prod(A[i + 1 : j + 1, h]))
                    worst = max(worst, abs(M[h, j, i] - prod))
    return SuiteResult("mask", worst <= tol, worst, tol, instances, seed)


def suite_noncausal(seed=0, instances=40, tol=1e-12):
    """Contraction == fused; rewritten-recurrence final state == global H."""
    rng = Rng(seed)
    worst = 0.0
    for _ in range(instances):
        L = int(rng.integers(1, 65, ()))
        Hd = int(rng.integers(1, 4, ()))
        P = int(rng.integers(1, 9, ()))
        N = int(rng.integers(1, 17, ()))
        inp = _random_noncausal(rng, L, Hd, P, N)
        y_c = ncssd_contraction(inp).data
        y_f = ncssd_fused(inp).data
        worst = max(worst, float(np.max(np.abs(y_c - y_f))))
        hs = ncssd_rewritten_recurrence(inp).data[-1]
        H = ncssd_hidden_state(inp).data
        worst = max(worst, float(np.max(np.abs(hs - H))))
    return SuiteResult("noncausal", worst <= tol, worst, tol, instances, seed)


def suite_routes(seed=0, instances=10, tol=0.0):
    """Scan-route equivariance of NC-SSD output; bitwise-invariant H."""
    rng = Rng(seed)
    worst = 0.0
    for _ in range(instances):
        h, w = int(rng.integers(2, 7, ())), int(rng.integers(2, 7, ()))
        L = h * w
        inp = _random_noncausal(rng, L, 2, 4, 8)
        y0 = ncssd_fused(inp).data
        H0 = ncssd_hidden_state(inp).data
        for route in (ScanRoute.identity(L), ScanRoute.reverse(L),
                      ScanRoute.column_major(h, w), ScanRoute.transpose_raster(h, w),
                      ScanRoute.random(L, rng)):
            rinp = apply_scan_route(inp, route)
            yr = ncssd_fused(rinp).data
            if not np.array_equal(yr, y0[route.perm]):
                worst = max(worst, float(np.max(np.abs(yr - y0[route.perm]))), 1e-300)
            if not np.array_equal(ncssd_hidden_state(rinp).data, H0):
                worst = max(worst, 1.0)
    return SuiteResult("routes", worst <= tol, worst, tol, instances, seed)


def suite_gradients(seed=0, instances=3, tol=1e-5):
    """Finite-difference checks of the fused kernel and the recurrence."""
    rng = Rng(seed)
    worst = 0.0
    for _ in range(instances):
        inp = _random_noncausal(rng, 6, 2, 3, 4)

        def f_fused():
            return ncssd_fused(inp).sum()

        worst = max(worst, grad_check(f_fused, [inp.X, inp.B, inp.C, inp.m]))
        cinp = _random_causal(rng, 5, 2, 3, 4)

        def f_rec():
            return ssd_recurrent(cinp).sum()

        worst = max(worst, grad_check(f_rec, [cinp.X, cinp.B, cinp.C, cinp.A]))
    return SuiteResult("gradients", worst <= tol, worst, tol, instances, seed)


SUITES = {
    "equivalence": suite_equivalence,
    "lti": suite_lti,
    "mask": suite_mask,
    "noncausal": suite_noncausal,
    "routes": suite_routes,
    "gradients": suite_gradients,
}


def run_suites(names=None, seed=0):
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {unknown}; available: {list(SUITES)}")
    return [SUITES[n](seed=seed) for n in names]
