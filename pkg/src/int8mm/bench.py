"""Relative-overhead micro-benchmarks for the matmul pipelines.

Times each pipeline phase (quantize, gemm, dequantize, decompose) with a
monotonic clock, excluding warm-up iterations and reporting the repetition
with the median total. Only relative timings on the host CPU are
meaningful; these are not hardware kernel benchmarks.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from os import PathLike

import numpy as np

from . import gemm, quantize
from .sweep import planted_pair
from .tensors import DenseMatrix

BENCH_COLUMNS = (
    "scheme",
    "rows",
    "inner",
    "cols",
    "reps",
    "quantize_s",
    "gemm_s",
    "dequantize_s",
    "decompose_s",
    "total_s",
)

CSV_NOTE = "# relative wall-clock timings on the host CPU; median-total repetition, warm-up excluded"

_PHASES = ("quantize", "gemm", "dequantize", "decompose")


@dataclass(frozen=True)
class BenchRow:
    scheme: str
    rows: int
    inner: int
    cols: int
    reps: int
    quantize_s: float
    gemm_s: float
    dequantize_s: float
    decompose_s: float
    total_s: float


def _timed_run(scheme: str, x: DenseMatrix, w: DenseMatrix, alpha: float) -> dict[str, float]:
    t = dict.fromkeys((*_PHASES, "total"), 0.0)
    start_total = time.perf_counter()

    if scheme == "exact":
        t0 = time.perf_counter()
        _ = x.data.astype(np.float64) @ w.data.astype(np.float64)
        t["gemm"] = time.perf_counter() - t0
    elif scheme in ("absmax", "zeropoint"):
        quantizer = quantize.absmax_quantize if scheme == "absmax" else quantize.zeropoint_quantize
        t0 = time.perf_counter()
        qx, qw = quantizer(x), quantizer(w)
        t["quantize"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        if scheme == "absmax":
            c = gemm.int8_gemm_i32(qx.codes, qw.codes)
        else:
            c = gemm.zeropoint_gemm_i32(qx.codes, qw.codes, qx.params.zp, qw.params.zp)
        t["gemm"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        _ = gemm.dequantize_output(c, qx.params, qw.params)
        t["dequantize"] = time.perf_counter() - t0
    elif scheme == "vectorwise":
        t0 = time.perf_counter()
        qx, qw = quantize.vectorwise_params(x, w)
        t["quantize"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        c = gemm.int8_gemm_i32(qx.codes, qw.codes)
        t["gemm"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        _ = gemm.dequantize_output(c, qx.params, qw.params)
        t["dequantize"] = time.perf_counter() - t0
    elif scheme == "llmint8":
        t0 = time.perf_counter()
        outliers = gemm.extract_outlier_columns(x, alpha)
        idx_out = np.fromiter(outliers.dims, dtype=np.intp)
        keep = np.ones(x.cols, dtype=bool)
        keep[idx_out] = False
        idx_keep = np.flatnonzero(keep)
        hi = gemm.ordered_matmul_f64(x.data[:, idx_out], w.data[idx_out, :])
        x_rest = DenseMatrix(x.data[:, idx_keep])
        w_rest = DenseMatrix(w.data[idx_keep, :])
        t["decompose"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        qx, qw = quantize.vectorwise_params(x_rest, w_rest)
        t["quantize"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        c = gemm.int8_gemm_i32(qx.codes, qw.codes)
        t["gemm"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        low = gemm.dequantize_output(c, qx.params, qw.params)
        _ = (low.data.astype(np.float64) + hi).astype(np.float32)
        t["dequantize"] = time.perf_counter() - t0
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    t["total"] = time.perf_counter() - start_total
    return t


def run_bench(
    shapes: list[tuple[int, int, int]],
    schemes: list[str],
    reps: int,
    warmup: int = 1,
    outlier_cols: int = 2,
    outlier_scale: float = 20.0,
    seed: int = 0,
) -> list[BenchRow]:
    """Phase timings for every (scheme, shape). reps must be >= 3.

    Each row reports the repetition with the median total, so the phase
    columns are mutually consistent and sum to the total minus a sliver of
    orchestration glue.
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    rows = []
    for scheme in schemes:
        for shape in shapes:
            x, w = planted_pair(*shape, outlier_cols, outlier_scale, seed)
            for _ in range(warmup):
                _timed_run(scheme, x, w, 6.0)
            samples = sorted(
                (_timed_run(scheme, x, w, 6.0) for _ in range(reps)),
                key=lambda s: s["total"],
            )
            mid = samples[len(samples) // 2]
            rows.append(
                BenchRow(
                    scheme,
                    *shape,
                    reps,
                    mid["quantize"],
                    mid["gemm"],
                    mid["dequantize"],
                    mid["decompose"],
                    mid["total"],
                )
            )
    return rows


def write_bench_csv(path: str | PathLike, rows: list[BenchRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_NOTE + "\n")
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for r in rows:
            writer.writerow([getattr(r, col) for col in BENCH_COLUMNS])
