"""Error sweeps comparing quantized matmul schemes against an exact oracle.

Each trial plants large-magnitude outlier columns in a Gaussian activation
matrix, runs one scheme, and reports error against the float64 product.
Error metric: relative Frobenius norm ||approx - exact||_F / ||exact||_F
plus the maximum elementwise error. This stands in for the perplexity
comparisons that would require pretrained models.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .gemm import absmax_matmul, llm_int8_matmul, vectorwise_matmul, zeropoint_matmul
from .tensors import DenseMatrix

SCHEMES = ("exact", "absmax", "zeropoint", "vectorwise", "llmint8")

SWEEP_COLUMNS = (
    "scheme",
    "rows",
    "inner",
    "cols",
    "outlier_cols",
    "outlier_scale",
    "seed",
    "rel_frobenius_error",
    "max_abs_error",
    "int8_fraction",
    "wall_time_s",
)

CSV_NOTE = (
    "# error metric: relative Frobenius norm ||approx - exact||_F / ||exact||_F "
    "vs the float64 product; stands in for perplexity, which needs pretrained models"
)


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    rows: int
    inner: int
    cols: int
    outlier_cols: int
    outlier_scale: float
    seed: int
    rel_frobenius_error: float
    max_abs_error: float
    int8_fraction: float
    wall_time_s: float


def planted_pair(
    rows: int,
    inner: int,
    cols: int,
    outlier_cols: int,
    outlier_scale: float,
    seed: int,
) -> tuple[DenseMatrix, DenseMatrix]:
    """Gaussian X (rows x inner) with scaled outlier columns, Gaussian W (inner x cols)."""
    if outlier_cols > inner:
        raise ValueError(f"cannot plant {outlier_cols} outlier columns in {inner}")
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal((rows, inner), dtype=np.float32)
    if outlier_cols:
        idx = rng.choice(inner, size=outlier_cols, replace=False)
        x[:, idx] *= np.float32(outlier_scale)
    w = rng.standard_normal((inner, cols), dtype=np.float32)
    return DenseMatrix(x), DenseMatrix(w)


def _exact_f32(x: DenseMatrix, w: DenseMatrix) -> np.ndarray:
    return (x.data.astype(np.float64) @ w.data.astype(np.float64)).astype(np.float32)


def run_trial(
    scheme: str,
    rows: int,
    inner: int,
    cols: int,
    outlier_cols: int,
    outlier_scale: float,
    seed: int,
    alpha: float = 6.0,
) -> SweepRow:
    """Run one (scheme, shape, seed) trial and score it against the exact product."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    x, w = planted_pair(rows, inner, cols, outlier_cols, outlier_scale, seed)
    exact = _exact_f32(x, w)

    start = time.perf_counter()
    if scheme == "exact":
        approx, int8_fraction = exact, 0.0
    elif scheme == "absmax":
        approx, int8_fraction = absmax_matmul(x, w).output.data, 1.0
    elif scheme == "zeropoint":
        approx, int8_fraction = zeropoint_matmul(x, w).output.data, 1.0
    elif scheme == "vectorwise":
        approx, int8_fraction = vectorwise_matmul(x, w).output.data, 1.0
    else:
        result = llm_int8_matmul(x, w, alpha)
        approx, int8_fraction = result.output.data, result.int8_fraction
    wall = time.perf_counter() - start

    diff = approx.astype(np.float64) - exact.astype(np.float64)
    denom = float(np.linalg.norm(exact))
    rel = float(np.linalg.norm(diff)) / denom if denom else float(np.linalg.norm(diff))
    return SweepRow(
        scheme=scheme,
        rows=rows,
        inner=inner,
        cols=cols,
        outlier_cols=outlier_cols,
        outlier_scale=outlier_scale,
        seed=seed,
        rel_frobenius_error=rel,
        max_abs_error=float(np.abs(diff).max()),
        int8_fraction=int8_fraction,
        wall_time_s=wall,
    )


def run_sweep(
    shapes: list[tuple[int, int, int]],
    schemes: list[str],
    outlier_cols: int,
    outlier_scale: float,
    seeds: list[int],
    alpha: float = 6.0,
    workers: int = 1,
) -> list[SweepRow]:
    """Run every (scheme, shape, seed) combination; rows come back in that order."""
    if not schemes or not seeds:
        raise ValueError("need at least one scheme and one seed")
    jobs = [
        (scheme, rows, inner, cols, seed)
        for scheme in schemes
        for rows, inner, cols in shapes
        for seed in seeds
    ]

    def job(args):
        scheme, rows, inner, cols, seed = args
        return run_trial(scheme, rows, inner, cols, outlier_cols, outlier_scale, seed, alpha)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, jobs))
    return [job(args) for args in jobs]


def mean_errors(rows: list[SweepRow]) -> dict[str, float]:
    """Mean relative Frobenius error per scheme."""
    by_scheme: dict[str, list[float]] = {}
    for r in rows:
        by_scheme.setdefault(r.scheme, []).append(r.rel_frobenius_error)
    return {s: float(np.mean(v)) for s, v in by_scheme.items()}


def write_sweep_csv(path: str | PathLike, rows: list[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_NOTE + "\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([getattr(r, col) for col in SWEEP_COLUMNS])
