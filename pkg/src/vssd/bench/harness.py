"""Kernel throughput microbenchmarks with a fixed CSV schema.

All variants in one comparison consume bitwise-identical inputs derived from
the spec's seed; the input hash is recorded so fairness is checkable from the
CSV alone.  Timing is a monotonic wall clock around the full kernel call,
reported as median and interquartile range over the timed iterations.
"""

from __future__ import annotations

import hashlib
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from ..tensor import Tensor
from ..tensor.rng import Rng
from ..kernels.reference import SsdSequenceInputs, bi_ssd, ssd_recurrent
from ..kernels.noncausal import NcssdInputs, ncssd_contraction, ncssd_fused
from ..model.layers import MultiHeadAttention
from .checks import SUITES

VARIANTS = ("ssd", "bi-ssd", "nc-ssd-contraction", "nc-ssd-fused", "msa")
MODES = ("forward", "forward+backward")

BENCH_COLUMNS = [
    "variant", "mode", "L", "N", "P", "heads", "batch", "dtype",
    "warmup", "iters", "threads", "seed", "median_s", "iqr_s",
    "throughput_seq_per_s", "input_sha256", "host",
]

THREADS_ENV = "VSSD_NUM_THREADS"

# variant -> correctness suite consulted before timing (correctness-before-speed)
_GATE_SUITE = {
    "ssd": "equivalence",
    "bi-ssd": "equivalence",
    "nc-ssd-contraction": "noncausal",
    "nc-ssd-fused": "noncausal",
    "msa": None,
}


class ResourceError(RuntimeError):
    """Estimated working set exceeds the memory budget."""


class CheckFailedError(RuntimeError):
    """A variant's correctness suite failed; benchmarking it is refused."""


@dataclass
class BenchSpec:
    variant: str
    L: int
    N: int = 16
    P: int = 24
    heads: int = 2
    batch: int = 8
    dtype: str = "float32"
    mode: str = "forward+backward"
    warmup: int = 3
    iters: int = 10

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.batch <= 0:
            raise ValueError("batch must be positive")
        if self.L <= 0 or self.N <= 0 or self.P <= 0 or self.heads <= 0:
            raise ValueError("L, N, P, heads must be positive")
        if self.iters < 5:
            raise ValueError("timed iters must be >= 5")
        if self.warmup < 1:
            raise ValueError("warmup iters must be >= 1")
        np.dtype(self.dtype)


@dataclass
class BenchRecord:
    spec: BenchSpec
    median_s: float
    iqr_s: float
    throughput: float
    input_sha256: str
    threads: str
    seed: int
    host: str

    def row(self):
        s = self.spec
        return [s.variant, s.mode, s.L, s.N, s.P, s.heads, s.batch, s.dtype,
                s.warmup, s.iters, self.threads, self.seed,
                f"{self.median_s:.9f}", f"{self.iqr_s:.9f}",
                f"{self.throughput:.3f}", self.input_sha256, self.host]


def make_inputs(spec: BenchSpec, seed=0):
    """Shared random inputs for every variant at these shapes."""
    rng = Rng(seed)
    dt = np.dtype(spec.dtype).type
    X = rng.normal((spec.batch, spec.L, spec.heads, spec.P)).astype(dt)
    B = rng.normal((spec.batch, spec.L, spec.N)).astype(dt)
    C = rng.normal((spec.batch, spec.L, spec.N)).astype(dt)
    m = (0.05 + 0.9 * rng.uniform((spec.batch, spec.L, spec.heads))).astype(dt)
    return {"X": X, "B": B, "C": C, "m": m}


def hash_inputs(inputs):
    h = hashlib.sha256()
    for key in sorted(inputs):
        h.update(key.encode())
        h.update(np.ascontiguousarray(inputs[key]).tobytes())
    return h.hexdigest()


def estimate_bytes(spec: BenchSpec):
    """Rough peak working set of the largest intermediate, in bytes."""
    item = np.dtype(spec.dtype).itemsize
    grad_factor = 4 if spec.mode == "forward+backward" else 2
    if spec.variant == "nc-ssd-contraction":
        core = spec.batch * spec.L * spec.heads * spec.N * spec.P
    elif spec.variant == "msa":
        core = spec.batch * spec.heads * spec.L * spec.L
    elif spec.variant in ("ssd", "bi-ssd"):
        # the tape keeps one (heads, N, P) state per step
        core = spec.batch * spec.L * spec.heads * spec.N * spec.P
    else:
        core = spec.batch * spec.L * spec.heads * max(spec.N, spec.P)
    return core * item * grad_factor


def _run_once(spec: BenchSpec, inputs, backward, attn=None):
    outs = []
    if spec.variant == "msa":
        b, l = inputs["X"].shape[:2]
        x = Tensor(inputs["X"].reshape(b, l, -1), requires_grad=backward)
        y = attn(x)
        if backward:
            y.sum().backward()
        return y
    for b in range(spec.batch):
        X = Tensor(inputs["X"][b], requires_grad=backward)
        B = Tensor(inputs["B"][b], requires_grad=backward)
        C = Tensor(inputs["C"][b], requires_grad=backward)
        m = Tensor(inputs["m"][b], requires_grad=backward)
        if spec.variant == "ssd":
            y = ssd_recurrent(SsdSequenceInputs(X, B, C, m))
        elif spec.variant == "bi-ssd":
            y = bi_ssd(SsdSequenceInputs(X, B, C, m))
        elif spec.variant == "nc-ssd-contraction":
            y = ncssd_contraction(NcssdInputs(X, B, C, m))
        else:
            y = ncssd_fused(NcssdInputs(X, B, C, m))
        if backward:
            y.sum().backward()
        outs.append(y)
    return outs


def run_bench(spec: BenchSpec, seed=0, force=False, memory_budget=3 * 1024**3,
              check_seed=0):
    """Warm up, time, and summarize one variant; returns a BenchRecord."""
    est = estimate_bytes(spec)
    if est > memory_budget:
        raise ResourceError(
            f"estimated working set {est / 1e9:.2f} GB exceeds budget "
            f"{memory_budget / 1e9:.2f} GB"
        )
    gate = _GATE_SUITE[spec.variant]
    if gate and not force:
        result = SUITES[gate](seed=check_seed)
        if not result.passed:
            raise CheckFailedError(
                f"suite {result.name!r} failed (worst err {result.worst_err:.3e}, "
                f"seed {result.seed}); rerun with force to bench anyway"
            )
    inputs = make_inputs(spec, seed)
    digest = hash_inputs(inputs)
    attn = None
    if spec.variant == "msa":
        dim = spec.heads * spec.P
        attn = MultiHeadAttention(Rng(seed), dim, spec.heads,
                                  dtype=np.dtype(spec.dtype).type)
        if spec.mode == "forward+backward":
            for p in attn.parameters():
                p.requires_grad = True
    backward = spec.mode == "forward+backward"
    for _ in range(spec.warmup):
        _run_once(spec, inputs, backward, attn)
    times = []
    for _ in range(spec.iters):
        t0 = time.monotonic()
        _run_once(spec, inputs, backward, attn)
        times.append(time.monotonic() - t0)
    q1, med, q3 = np.percentile(times, [25, 50, 75])
    return BenchRecord(
        spec=spec,
        median_s=float(med),
        iqr_s=float(q3 - q1),
        throughput=spec.batch / float(med),
        input_sha256=digest,
        threads=os.environ.get(THREADS_ENV, ""),
        seed=seed,
        host=platform.node() or platform.machine(),
    )


def append_csv(path, record: BenchRecord):
    """Append one record, writing the fixed header on first use."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as f:
        if new:
            f.write(",".join(BENCH_COLUMNS) + "\n")
        f.write(",".join(str(v) for v in record.row()) + "\n")
