"""Acceptance criteria, one test per criterion at its pinned tolerance.

Run with ``pytest -v`` for one pass/fail line per criterion (add ``-s`` to see
the measured values).  Criterion 10 needs the CIFAR-10 binary batches; point
VSSD_CIFAR10_DIR at the directory holding data_batch_*.bin, otherwise that
criterion reports an explained skip.
"""

import os
import time

import numpy as np
import pytest

from vssd.tensor import Rng, Tensor, grad_check
from vssd.kernels.reference import (
    SsdSequenceInputs,
    apply_matrix_form,
    bi_ssd,
    lti_conv_apply,
    lti_conv_kernel,
    ssd_matrix_form,
    ssd_quadratic,
    ssd_recurrent,
)
from vssd.kernels.noncausal import (
    NcssdInputs,
    ScanRoute,
    apply_scan_route,
    bidir_hidden_identity,
    ncssd_contraction,
    ncssd_fused,
    ncssd_hidden_state,
    ncssd_rewritten_recurrence,
)
from vssd.model import (
    ModelConfig,
    StageSpec,
    VssdBlock,
    VssdModel,
    count_params_flops,
    micro_config,
    reduced_config,
    tiny_config,
)
from vssd.model.layers import MultiHeadAttention
from vssd.model.blocks import NcssdMixer
from vssd.analysis import comparative_report, erf_map, stability_probe
from vssd.bench import BenchSpec, run_bench
from vssd.train import TrainConfig, label_smoothing_ce, load_cifar10_binary, train_loop


def _verdict(num, ok, detail):
    line = f"criterion {num:02d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    assert ok, line


def _causal(rng, L, Hd, P, N):
    return SsdSequenceInputs(
        rng.normal((L, Hd, P)), rng.normal((L, N)), rng.normal((L, N)),
        0.05 + 0.9 * rng.uniform((L, Hd)),
    )


def _noncausal(rng, L, Hd, P, N):
    return NcssdInputs(
        rng.normal((L, Hd, P)), rng.normal((L, N)), rng.normal((L, N)),
        0.05 + 0.9 * rng.uniform((L, Hd)),
    )


def test_criterion_01_causal_form_equivalence():
    rng = Rng(101)
    t0 = time.monotonic()
    worst = 0.0
    for _ in range(200):
        L = int(rng.integers(1, 65, ()))
        N = int(rng.integers(1, 17, ()))
        P = int(rng.integers(1, 9, ()))
        Hd = int(rng.integers(1, 4, ()))
        inp = _causal(rng, L, Hd, P, N)
        y_rec = ssd_recurrent(inp).data
        y_quad = ssd_quadratic(inp).data
        y_mat = apply_matrix_form(ssd_matrix_form(inp), inp.X)
        worst = max(worst, float(np.max(np.abs(y_rec - y_quad))),
                    float(np.max(np.abs(y_rec - y_mat))))
    elapsed = time.monotonic() - t0
    _verdict(1, worst < 1e-10 and elapsed < 30.0,
             f"200 instances, max abs diff {worst:.3e} (tol 1e-10), {elapsed:.1f}s")


def test_criterion_02_lti_convolution_identity():
    rng = Rng(102)
    worst = 0.0
    for L in list(range(1, 17)) + [32, 64, 100, 128]:
        N = int(rng.integers(1, 9, ()))
        a = float(0.05 + 0.9 * rng.uniform(()))
        B, C, x = rng.normal((N,)), rng.normal((N,)), rng.normal((L,))
        y_conv = lti_conv_apply(x, lti_conv_kernel(a, B, C, L))
        inp = SsdSequenceInputs(x.reshape(L, 1, 1), np.tile(B, (L, 1)),
                                np.tile(C, (L, 1)), np.full((L, 1), a))
        y_rec = ssd_recurrent(inp).data.reshape(-1)
        worst = max(worst, float(np.max(np.abs(y_conv - y_rec))))
    _verdict(2, worst < 1e-12, f"L up to 128, max abs diff {worst:.3e} (tol 1e-12)")


def test_criterion_03_ncssd_form_equivalence():
    rng = Rng(103)
    worst = 0.0
    for _ in range(200):
        L = int(rng.integers(1, 257, ()))
        inp = _noncausal(rng, L, int(rng.integers(1, 4, ())),
                         int(rng.integers(1, 9, ())), int(rng.integers(1, 17, ())))
        diff = np.abs(ncssd_contraction(inp).data - ncssd_fused(inp).data)
        worst = max(worst, float(diff.max()))
    _verdict(3, worst < 1e-12, f"200 instances, max abs diff {worst:.3e} (tol 1e-12)")


def test_criterion_04_hidden_state_collapse_and_bidir():
    rng = Rng(104)
    worst = 0.0
    for _ in range(100):
        L = int(rng.integers(1, 33, ()))
        inp = _noncausal(rng, L, 2, 4, 8)
        final = ncssd_rewritten_recurrence(inp).data[-1]
        H = ncssd_hidden_state(inp).data
        worst = max(worst, float(np.max(np.abs(final - H))))
        for i in range(1, L + 1):
            bidir_hidden_identity(inp, i, tol=1e-12)  # raises beyond tolerance
    _verdict(4, worst < 1e-12,
             f"100 instances, collapse max abs diff {worst:.3e}, "
             f"bidirectional identity held at every index (tol 1e-12)")


def test_criterion_05_scan_route_consistency():
    rng = Rng(105)
    h, w = 5, 7
    L = h * w
    inp = _noncausal(rng, L, 2, 4, 8)
    y0 = ncssd_fused(inp).data
    H0 = ncssd_hidden_state(inp).data
    routes = [ScanRoute.identity(L), ScanRoute.reverse(L),
              ScanRoute.column_major(h, w), ScanRoute.transpose_raster(h, w),
              ScanRoute.random(L, rng)]
    equivariant = True
    invariant = True
    for route in routes:
        rinp = apply_scan_route(inp, route)
        equivariant &= np.array_equal(ncssd_fused(rinp).data, y0[route.perm])
        invariant &= np.array_equal(ncssd_hidden_state(rinp).data, H0)
    # causal SSD must fail the same test
    cinp = _causal(rng, L, 2, 4, 8)
    yc = ssd_recurrent(cinp).data
    perm = ScanRoute.reverse(L).perm
    pc = SsdSequenceInputs(cinp.X.data[perm], cinp.B.data[perm],
                           cinp.C.data[perm], cinp.A.data[perm])
    causal_diff = float(np.max(np.abs(ssd_recurrent(pc).data - yc[perm])))
    _verdict(5, equivariant and invariant and causal_diff > 0.0,
             f"5 routes exactly equivariant, H bitwise invariant; "
             f"causal route diff {causal_diff:.3e} (> 0 as required)")


def test_criterion_06_gradient_correctness():
    t0 = time.monotonic()
    rng = Rng(106)
    inp = _noncausal(rng, 8, 2, 4, 6)

    def f_fused():
        return ncssd_fused(inp).mean()

    err_fused = grad_check(f_fused, [inp.X, inp.B, inp.C, inp.m])

    block = VssdBlock(Rng(107), 4, 2, 2, expand=2, ffn_ratio=2)
    xb = Tensor(Rng(108).normal((1, 4, 2, 2)))

    def f_block():
        return block(xb).mean()

    err_block = grad_check(f_block, [xb] + block.parameters())

    cfg = ModelConfig(stages=[StageSpec(1, 8, 2, state_dim=4)], num_classes=3,
                      drop_path_rate=0.0)
    model = VssdModel(cfg, Rng(109))
    xm = Tensor(Rng(110).normal((2, 3, 8, 8)))
    labels = np.array([0, 2])

    def f_loss():
        return label_smoothing_ce(model(xm), labels, 0.1)

    err_loss = grad_check(f_loss, [xm] + model.parameters())
    elapsed = time.monotonic() - t0
    worst = max(err_fused, err_block, err_loss)
    _verdict(6, worst < 1e-5 and elapsed < 300.0,
             f"rel err fused {err_fused:.2e}, block {err_block:.2e}, "
             f"loss {err_loss:.2e} (tol 1e-5), {elapsed:.0f}s")


def test_criterion_07_table_reconstruction():
    micro = count_params_flops(micro_config(), image_size=224)
    tiny = count_params_flops(tiny_config(), image_size=224)
    ok = (abs(micro.params - 14e6) <= 1.4e6 and abs(micro.flops - 2.3e9) <= 0.345e9
          and abs(tiny.params - 24e6) <= 2.4e6 and abs(tiny.flops - 4.5e9) <= 0.675e9)
    _verdict(7, ok,
             f"micro {micro.params / 1e6:.2f}M / {micro.flops / 1e9:.2f}G "
             f"(targets 14M +-10% / 2.3G +-15%); "
             f"tiny {tiny.params / 1e6:.2f}M / {tiny.flops / 1e9:.2f}G "
             f"(targets 24M +-10% / 4.5G +-15%)")


def test_criterion_08_efficiency_ordering():
    shapes = dict(L=1024, N=16, P=24, heads=2, batch=2, dtype="float32",
                  mode="forward+backward", warmup=1, iters=5)
    recs = {v: run_bench(BenchSpec(v, **shapes), seed=8)
            for v in ("nc-ssd-fused", "ssd", "bi-ssd")}
    fused = recs["nc-ssd-fused"].median_s
    ok = (fused < 0.9 * recs["ssd"].median_s
          and fused < 0.9 * recs["bi-ssd"].median_s
          and len({r.input_sha256 for r in recs.values()}) == 1)
    thru = {v: f"{r.throughput:.1f}" for v, r in recs.items()}
    _verdict(8, ok,
             f"median f+b step: fused {fused * 1e3:.1f}ms, "
             f"ssd {recs['ssd'].median_s * 1e3:.1f}ms, "
             f"bi-ssd {recs['bi-ssd'].median_s * 1e3:.1f}ms "
             f"(>= 10% margins); throughputs seq/s {thru} (reported, not asserted)")


def _median_time(fn, reps=5):
    ts = []
    for _ in range(reps):
        t0 = time.monotonic()
        fn()
        ts.append(time.monotonic() - t0)
    return float(np.median(ts))


def _fit_r2(x, y, powers):
    A = np.stack([x ** p for p in powers], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot, ss_res


def test_criterion_09_complexity_scaling():
    sizes = [(28, 28), (56, 56), (112, 112)]
    Ls = np.array([h * w for h, w in sizes], dtype=np.float64)
    mixer = NcssdMixer(Rng(9), 16, 2, 16, dtype=np.float32)
    t_mix = []
    for h, w in sizes:
        x = Tensor(Rng(10).normal((1, h * w, 16)).astype(np.float32))
        t_mix.append(_median_time(lambda: mixer(x, (h, w))))
    attn = MultiHeadAttention(Rng(11), 16, 1, dtype=np.float32)
    t_msa = []
    for h, w in sizes:
        x = Tensor(Rng(12).normal((1, h * w, 16)).astype(np.float32))
        t_msa.append(_median_time(lambda: attn(x)))
    t_mix, t_msa = np.array(t_mix), np.array(t_msa)
    r2_lin, _ = _fit_r2(Ls, t_mix, (0, 1))
    _, sse_msa_lin = _fit_r2(Ls, t_msa, (0, 1))
    _, sse_msa_quad = _fit_r2(Ls, t_msa, (0, 2))
    ok = r2_lin > 0.98 and sse_msa_quad < sse_msa_lin
    _verdict(9, ok,
             f"NC-SSD mixer linear fit R^2 {r2_lin:.4f} (> 0.98); MSA quadratic "
             f"SSE {sse_msa_quad:.2e} < linear SSE {sse_msa_lin:.2e}; "
             f"L={Ls.astype(int).tolist()}, mixer ms {np.round(t_mix * 1e3, 2).tolist()}, "
             f"msa ms {np.round(t_msa * 1e3, 2).tolist()}")


def test_criterion_10_desk_training():
    data_dir = os.environ.get("VSSD_CIFAR10_DIR", "")
    if not data_dir or not os.path.isdir(data_dir):
        pytest.skip(
            "criterion 10: SKIP  CIFAR-10 binaries not available in this "
            "environment (no network access); set VSSD_CIFAR10_DIR to the "
            "directory containing data_batch_*.bin to run the 20-epoch check "
            "against the 55% floor"
        )
    train, test = load_cifar10_binary(data_dir)
    cfg = reduced_config(num_classes=10)
    model = VssdModel(cfg, Rng(0), dtype=np.float32)
    tc = TrainConfig(epochs=20, warmup_epochs=2, batch_size=128, peak_lr=1e-3,
                     weight_decay=0.05, label_smoothing=0.1, seed=0,
                     drop_path_rate=0.1)
    res = train_loop(model, tc, train, test)
    _verdict(10, res.status == "ok" and res.final_val_acc > 0.55,
             f"status {res.status}, final val acc {res.final_val_acc:.4f} "
             f"(floor 0.55)")


def test_criterion_11_m_ablation_probe():
    cfg = ModelConfig(stages=[StageSpec(4, 8, 2, state_dim=4),
                              StageSpec(4, 16, 2, state_dim=4)], num_classes=4)
    steps = 10
    tw = stability_probe(cfg, steps=steps, with_m=True, seed=11)
    tn = stability_probe(cfg, steps=steps, with_m=False, seed=11)
    report = comparative_report(tw, tn)
    complete = lambda t: (len(t.rows) == t.blocks * t.steps_run
                          and (t.steps_run == steps or t.divergence_step is not None))
    ok = (tw.blocks >= 8 and complete(tw) and complete(tn)
          and "with m" in report and "m == 1" in report)
    div = ("none" if tn.divergence_step is None
           else f"step {tn.divergence_step}")
    _verdict(11, ok,
             f"depth {tw.blocks} blocks, both traces complete; m==1 divergence: "
             f"{div} (reported, not asserted); peak |act| with m "
             f"{max(r['act_max'] for r in tw.rows):.3g} vs m==1 "
             f"{max(r['act_max'] for r in tn.rows):.3g}")


def test_criterion_12_erf_globality():
    from tests_helpers import DwBaseline  # local helper module

    cfg = ModelConfig(stages=[StageSpec(1, 8, 2, state_dim=4)], num_classes=0,
                      use_lpu=False, drop_path_rate=0.0)
    model = VssdModel(cfg, Rng(12))
    for block in model.all_blocks():
        w = block.mixer.conv.weight.data
        w[:] = 0.0
        w[:, 1, 1] = 1.0  # identity depthwise kernel: local mixing removed
    em = erf_map(model, Rng(13).normal((4, 3, 16, 16)))
    global_ok = bool(np.all(em.grid > 0.0))

    base = DwBaseline(Rng(14), depth=3)
    em2 = erf_map(base, Rng(15).normal((4, 3, 16, 16)))
    mask = np.zeros((16, 16), bool)
    mask[8 - 3 : 8 + 4, 8 - 3 : 8 + 4] = True
    local_ok = bool(np.all(em2.grid[~mask] == 0.0) and np.all(em2.grid[mask] > 0.0))
    _verdict(12, global_ok and local_ok,
             f"NC-SSD saliency > 0 at {np.count_nonzero(em.grid)}/{em.grid.size} "
             f"positions; DWConv baseline exactly zero outside its 7x7 support")
