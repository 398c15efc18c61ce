"""Command-line entry point: correctness suites, benchmarks, training, analysis."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .tensor.io import read_nctd, write_nctd
from .tensor.rng import Rng


def _cmd_check(args):
    from .bench.checks import SUITES, run_suites

    names = [args.suite] if args.suite else None
    try:
        results = run_suites(names, seed=args.seed)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ok = True
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:12s} {status}  worst err {r.worst_err:.3e}  "
              f"tol {r.tolerance:g}  instances {r.instances}  seed {r.seed}")
        ok = ok and r.passed
    if not ok:
        failed = [r.name for r in results if not r.passed]
        print(f"failed suites: {', '.join(failed)} (reproduce with --seed {args.seed})",
              file=sys.stderr)
    return 0 if ok else 1


def _cmd_bench(args):
    from .bench.harness import BenchSpec, CheckFailedError, ResourceError, append_csv, run_bench

    spec = BenchSpec(
        variant=args.variant, L=args.len, N=args.state, P=args.headdim,
        heads=args.heads, batch=args.batch, dtype=args.dtype, mode=args.mode,
        warmup=args.warmup, iters=args.iters,
    )
    try:
        rec = run_bench(spec, seed=args.seed, force=args.force)
    except (CheckFailedError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{spec.variant} {spec.mode}: median {rec.median_s * 1e3:.3f} ms  "
          f"IQR {rec.iqr_s * 1e3:.3f} ms  throughput {rec.throughput:.1f} seq/s  "
          f"inputs {rec.input_sha256[:12]}")
    if args.csv:
        append_csv(args.csv, rec)
    return 0


def _build_model_from_args(args, num_classes, dtype):
    from .model import ModelConfig, VssdModel, micro_config, reduced_config, tiny_config

    if args.model_config:
        with open(args.model_config) as f:
            cfg = ModelConfig.from_json(f.read())
    else:
        factory = {"micro": micro_config, "tiny": tiny_config,
                   "reduced": reduced_config}[args.arch]
        cfg = factory(num_classes=num_classes)
    return cfg, VssdModel(cfg, Rng(args.model_seed), dtype=dtype)


def _cmd_train(args):
    from .train import TrainConfig, load_cifar10_binary, synthetic_dataset, train_loop

    if args.config:
        with open(args.config) as f:
            tc = TrainConfig.from_json(f.read())
    else:
        tc = TrainConfig()
    if args.data:
        train, val = load_cifar10_binary(args.data)
        num_classes = 10
    else:
        num_classes = 4
        train = synthetic_dataset(512, image_size=32, num_classes=num_classes,
                                  seed=tc.seed + 1, template_seed=tc.seed)
        val = synthetic_dataset(128, image_size=32, num_classes=num_classes,
                                seed=tc.seed + 2, template_seed=tc.seed)
    dtype = np.dtype(tc.dtype).type
    cfg, model = _build_model_from_args(args, num_classes, dtype)
    result = train_loop(model, tc, train, val, out_dir=args.out)
    print(f"status {result.status}  final val acc {result.final_val_acc:.4f}")
    return 0 if result.status == "ok" else 1


def _load_image(path):
    """Load one image as (C, H, W) float: NCTD tensor or binary PPM/PGM."""
    from .analysis.pgm import read_pgm, read_ppm

    if path.endswith(".nctd"):
        arr = read_nctd(path)
        if arr.ndim != 3:
            raise ValueError(f"{path}: expected a (C, H, W) tensor, got shape {arr.shape}")
        return arr.astype(np.float64)
    if path.endswith(".ppm"):
        return read_ppm(path).astype(np.float64).transpose(2, 0, 1) / 255.0
    if path.endswith(".pgm"):
        g = read_pgm(path).astype(np.float64) / 255.0
        return np.stack([g, g, g])
    raise ValueError(f"unsupported image format: {path} (use .nctd, .ppm, or .pgm)")


def _cmd_erf(args):
    from .analysis import erf_map, write_pgm
    from .model import load_checkpoint

    model = load_checkpoint(args.ckpt)
    files = sorted(
        os.path.join(args.images, f) for f in os.listdir(args.images)
        if f.endswith((".nctd", ".ppm", ".pgm"))
    )
    if not files:
        print(f"error: no images found in {args.images}", file=sys.stderr)
        return 1
    images = np.stack([_load_image(f) for f in files])
    em = erf_map(model, images, source=args.ckpt)
    if em.degenerate:
        print("warning: degenerate all-zero saliency map", file=sys.stderr)
    write_pgm(args.out, em.log_grid if args.log_scale else em.grid)
    print(f"wrote {args.out} ({em.image_count} images, center {em.center}, "
          f"{'log' if args.log_scale else 'linear'} scale)")
    return 0


def _cmd_heatmap_m(args):
    from .analysis import bilinear_upsample, m_heatmap, write_pgm
    from .model import load_checkpoint

    model = load_checkpoint(args.ckpt)
    image = _load_image(args.image)
    grid = m_heatmap(model, image, args.stage)
    if args.upsample:
        grid = np.clip(bilinear_upsample(grid, image.shape[1], image.shape[2]), 0.0, 1.0)
    write_pgm(args.out, grid)
    print(f"wrote {args.out} (stage {args.stage}, grid {grid.shape[0]}x{grid.shape[1]})")
    return 0


def _cmd_stability(args):
    from .analysis import comparative_report, stability_probe, write_trace_csv
    from .model import ModelConfig, reduced_config

    if args.config:
        with open(args.config) as f:
            cfg = ModelConfig.from_json(f.read())
    else:
        cfg = reduced_config(num_classes=4)
    trace = stability_probe(cfg, steps=args.steps, with_m=not args.no_m,
                            seed=args.seed, log=print)
    write_trace_csv(trace, args.out)
    if trace.divergence_step is not None:
        print(f"divergence recorded at step {trace.divergence_step}")
    print(f"wrote {args.out} ({trace.steps_run} steps x {trace.blocks} blocks)")
    if args.report:
        other = stability_probe(cfg, steps=args.steps, with_m=args.no_m,
                                seed=args.seed)
        with_t, without_t = (other, trace) if args.no_m else (trace, other)
        with open(args.report, "w") as f:
            f.write(comparative_report(with_t, without_t))
        print(f"wrote {args.report}")
    return 0


def _cmd_export_tensor(args):
    arr = np.load(args.infile)
    write_nctd(args.out, arr)
    print(f"wrote {args.out}: dtype {arr.dtype.name}, shape {tuple(arr.shape)}")
    return 0


def _cmd_import_tensor(args):
    arr = read_nctd(args.infile)
    if args.out:
        np.save(args.out, arr)
        print(f"wrote {args.out}: dtype {arr.dtype.name}, shape {tuple(arr.shape)}")
    else:
        print(f"{args.infile}: dtype {arr.dtype.name}, shape {tuple(arr.shape)}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="vssd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run correctness suites")
    c.add_argument("--suite", help="run only this suite")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(fn=_cmd_check)

    b = sub.add_parser("bench", help="time one kernel variant")
    b.add_argument("--variant", required=True)
    b.add_argument("--len", type=int, required=True)
    b.add_argument("--state", type=int, default=16)
    b.add_argument("--headdim", type=int, default=24)
    b.add_argument("--heads", type=int, default=2)
    b.add_argument("--batch", type=int, default=8)
    b.add_argument("--dtype", default="float32")
    b.add_argument("--mode", default="forward+backward")
    b.add_argument("--warmup", type=int, default=3)
    b.add_argument("--iters", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv", help="append the record to this CSV file")
    b.add_argument("--force", action="store_true",
                   help="bench even if the variant's check suite fails")
    b.set_defaults(fn=_cmd_bench)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", help="training config JSON")
    t.add_argument("--model-config", help="model config JSON")
    t.add_argument("--arch", default="reduced", choices=["micro", "tiny", "reduced"])
    t.add_argument("--model-seed", type=int, default=0)
    t.add_argument("--data", help="CIFAR-10 binary batch directory (else synthetic)")
    t.add_argument("--out", help="output directory for metrics and checkpoints")
    t.set_defaults(fn=_cmd_train)

    e = sub.add_parser("erf", help="effective-receptive-field map")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--images", required=True, help="directory of .nctd/.ppm/.pgm images")
    e.add_argument("--out", required=True, help="output PGM path")
    e.add_argument("--log-scale", action="store_true")
    e.set_defaults(fn=_cmd_erf)

    h = sub.add_parser("heatmap-m", help="per-stage heat map of m")
    h.add_argument("--ckpt", required=True)
    h.add_argument("--image", required=True)
    h.add_argument("--stage", type=int, required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--upsample", action="store_true",
                   help="bilinear-upsample to the input resolution")
    h.set_defaults(fn=_cmd_heatmap_m)

    s = sub.add_parser("stability", help="training-stability probe for m")
    s.add_argument("--config", help="model config JSON (default: reduced)")
    s.add_argument("--no-m", action="store_true", help="ablate the token weight (m == 1)")
    s.add_argument("--steps", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="trace CSV path")
    s.add_argument("--report", help="also run the opposite arm and write a comparison")
    s.set_defaults(fn=_cmd_stability)

    x = sub.add_parser("export-tensor", help="convert a .npy array to NCTD")
    x.add_argument("infile")
    x.add_argument("--out", required=True)
    x.set_defaults(fn=_cmd_export_tensor)

    i = sub.add_parser("import-tensor", help="read an NCTD tensor (optionally to .npy)")
    i.add_argument("infile")
    i.add_argument("--out")
    i.set_defaults(fn=_cmd_import_tensor)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
