"""Command-line interface: quantize, sweep, analyze, ablate, mem, bench.

All randomness flows from explicit seed arguments; outputs are
deterministic given the same arguments (timing columns excepted).
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import outliers, quantize, sweep, transformer
from .memory import estimate_memory
from .qt8 import read_tensor, write_tensor
from .tensors import DenseMatrix


def _parse_shapes(text: str) -> list[tuple[int, int, int]]:
    shapes = []
    for part in text.split(","):
        dims = part.lower().split("x")
        if len(dims) != 3:
            raise ValueError(f"shape {part!r} is not of the form SxHxO")
        shapes.append(tuple(int(d) for d in dims))
    return shapes


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",")]


def _params_to_dict(params: quantize.QuantParams) -> dict:
    if isinstance(params, quantize.AbsmaxParams):
        return {"scheme": "absmax", "scale": params.scale}
    if isinstance(params, quantize.ZeropointParams):
        return {"scheme": "zeropoint", "nd": params.nd, "zp": params.zp, "offset": params.offset}
    if isinstance(params, quantize.RowwiseParams):
        return {"scheme": "rowwise", "scales": params.scales.tolist()}
    return {"scheme": "colwise", "scales": params.scales.tolist()}


def cmd_quantize(args: argparse.Namespace) -> int:
    tensor = read_tensor(args.in_path)
    if not isinstance(tensor, DenseMatrix):
        raise ValueError(f"{args.in_path}: quantize expects an f32 tensor")
    quantizer = {
        "absmax": quantize.absmax_quantize,
        "zeropoint": quantize.zeropoint_quantize,
        "rowwise": quantize.rowwise_quantize,
    }[args.scheme]
    q = quantizer(tensor)
    write_tensor(args.out, q.codes)
    sidecar = Path(str(args.out) + ".params.json")
    sidecar.write_text(
        json.dumps({"source_shape": list(q.source_shape), **_params_to_dict(q.params)}, indent=2)
        + "\n"
    )
    err = float(np.abs(quantize.dequantize(q).data - tensor.data).max())
    print(f"wrote {args.out} and {sidecar}")
    print(f"round-trip max error: {err:.8g}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    shapes = _parse_shapes(args.shapes)
    schemes = args.schemes.split(",")
    for s in schemes:
        if s not in sweep.SCHEMES:
            raise ValueError(f"unknown scheme {s!r}, expected one of {sweep.SCHEMES}")
    seeds = _parse_seeds(args.seeds)
    rows = sweep.run_sweep(
        shapes, schemes, args.outlier_cols, args.outlier_scale, seeds,
        alpha=args.alpha, workers=args.workers,
    )
    sweep.write_sweep_csv(args.out, rows)
    means = sweep.mean_errors(rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    order = sorted(means, key=means.get, reverse=True)
    print("mean relative Frobenius error, worst to best:")
    for s in order:
        print(f"  {s:<12} {means[s]:.6g}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    stack, manifest = outliers.load_stack(args.stack)
    detected = outliers.detect_outlier_dims(
        stack, alpha=args.alpha, layer_frac=args.layer_frac, seq_frac=args.seq_frac
    )
    reports = outliers.outlier_stats(stack, detected)
    outliers.write_report_csv(args.out, reports)
    meta = {
        "stack": str(args.stack),
        "manifest": manifest,
        "alpha": args.alpha,
        "layer_frac": args.layer_frac,
        "seq_frac": args.seq_frac,
    }
    json_path = Path(str(args.out) + ".json")
    outliers.write_report_json(json_path, reports, meta)
    print(f"wrote {args.out} and {json_path} ({len(reports)} outlier dims)")
    return 0


def _ablation_to_dict(result: transformer.AblationResult) -> dict:
    return {
        "mean_top1_with": result.mean_top1_with,
        "mean_top1_without": result.mean_top1_without,
        "ppl_proxy_with": result.ppl_proxy_with,
        "ppl_proxy_without": result.ppl_proxy_without,
        "dims_zeroed": list(result.dims_zeroed.dims),
        "control": result.control,
    }


def cmd_ablate(args: argparse.Namespace) -> int:
    config = transformer.config_from_dict(json.loads(Path(args.config).read_text()))
    model = transformer.build_model(config)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    tokens = [int(t) for t in rng.integers(0, config.vocab, size=args.seq_len)]

    trace = transformer.forward(model, tokens, transformer.EXACT)
    detected = outliers.detect_outlier_dims(trace.hidden_stack, alpha=args.alpha)

    spec = args.dims
    control = False
    if spec == "detected":
        dims = detected
    elif spec.startswith("random:"):
        k = int(spec.split(":", 1)[1])
        dims = outliers.random_control_dims(config.hidden, k, detected, seed=config.seed + 1)
        control = True
    else:
        dims = outliers.OutlierSet(tuple(int(d) for d in spec.split(",")), args.alpha)

    payload = {
        "config": json.loads(Path(args.config).read_text()),
        "tokens": tokens,
        "dims_mode": spec,
        "detected_dims": list(detected.dims),
        "isolate_layers": _ablation_to_dict(
            transformer.ablate_and_measure(model, tokens, dims, isolate_layers=True, control=control)
        ),
        "cascade": _ablation_to_dict(
            transformer.ablate_and_measure(model, tokens, dims, isolate_layers=False, control=control)
        ),
    }
    if args.control and not control:
        paired = outliers.random_control_dims(
            config.hidden, len(dims), detected, seed=config.seed + 1
        )
        payload["control"] = {
            "isolate_layers": _ablation_to_dict(
                transformer.ablate_and_measure(model, tokens, paired, isolate_layers=True, control=True)
            ),
            "cascade": _ablation_to_dict(
                transformer.ablate_and_measure(model, tokens, paired, isolate_layers=False, control=True)
            ),
        }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {args.out}")
    return 0


def cmd_mem(args: argparse.Namespace) -> int:
    est = estimate_memory(args.params, args.hidden, args.outliers)
    print(json.dumps(asdict(est), indent=2))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    shapes = _parse_shapes(args.shapes)
    schemes = args.schemes.split(",")
    rows = bench_mod.run_bench(shapes, schemes, args.reps, seed=args.seed)
    bench_mod.write_bench_csv(args.out, rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="int8mm",
        description="Int8 quantized matmul schemes, outlier analysis, and ablation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="quantize a QT8 f32 tensor to int8 codes")
    p.add_argument("--scheme", required=True, choices=["absmax", "zeropoint", "rowwise"])
    p.add_argument("--in", dest="in_path", required=True, help="input QT8 f32 tensor")
    p.add_argument("--out", required=True, help="output QT8 i8 tensor; params go to OUT.params.json")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("sweep", help="compare scheme errors on planted-outlier matmuls")
    p.add_argument("--shapes", required=True, help="comma-separated SxHxO shapes, e.g. 64x256x64")
    p.add_argument("--schemes", required=True, help=f"comma-separated subset of {','.join(sweep.SCHEMES)}")
    p.add_argument("--outlier-cols", type=int, default=0)
    p.add_argument("--outlier-scale", type=float, default=20.0)
    p.add_argument("--seeds", required=True, help="A..B inclusive range, or comma list")
    p.add_argument("--alpha", type=float, default=6.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="detect outlier dims in a hidden-state stack directory")
    p.add_argument("--stack", required=True, help="directory of layer_<l>.qt8 + manifest.json")
    p.add_argument("--alpha", type=float, default=6.0)
    p.add_argument("--layer-frac", type=float, default=0.25)
    p.add_argument("--seq-frac", type=float, default=0.06)
    p.add_argument("--out", required=True, help="output CSV; JSON goes to OUT.json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ablate", help="zero feature dims in a toy model and measure the damage")
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--dims", required=True, help="'detected', 'random:K', or comma list of dims")
    p.add_argument("--alpha", type=float, default=6.0)
    p.add_argument("--seq-len", type=int, default=24)
    p.add_argument("--control", action="store_true", help="also run a paired random control")
    p.add_argument("--out", required=True, help="output JSON")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("mem", help="estimate 16-bit vs int8 memory footprint")
    p.add_argument("--params", type=int, required=True)
    p.add_argument("--hidden", type=int, required=True)
    p.add_argument("--outliers", type=int, required=True)
    p.set_defaults(func=cmd_mem)

    p = sub.add_parser("bench", help="relative phase timings per scheme")
    p.add_argument("--shapes", required=True)
    p.add_argument("--schemes", default=",".join(sweep.SCHEMES))
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
