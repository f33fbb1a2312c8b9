"""Integer matrix multiplication and the four dequantized matmul pipelines.

All integer arithmetic is exact: products accumulate in 64-bit integers
internally and are returned as int32 after an explicit range check, so
results are bit-identical regardless of execution schedule. Inputs whose
inner dimension exceeds the overflow guard are refused outright rather
than silently widened.

The high-precision partial product used by the mixed-precision
decomposition accumulates in float64 with a fixed per-output-element
order (ascending inner index), making float results deterministic too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .outliers import OutlierSet
from .quantize import (
    AbsmaxParams,
    ColwiseParams,
    QuantParams,
    RowwiseParams,
    ZeropointParams,
    absmax_quantize,
    colwise_quantize,
    rowwise_quantize,
    zeropoint_quantize,
)
from .tensors import DenseMatrix, Int8Matrix, Int32Matrix, ShapeMismatchError

# 127^2 * 2^17 < 2^31, so int8 codes cannot overflow an int32 accumulator.
MAX_INNER_DIM = 1 << 17

_I32_MIN = np.iinfo(np.int32).min
_I32_MAX = np.iinfo(np.int32).max


class GemmOverflowError(ValueError):
    """The accumulation would not fit in a signed 32-bit integer."""


class ParamsMismatchError(ValueError):
    """Quantization params do not match the scheme expected for this output."""


@dataclass(frozen=True, eq=False)
class MatmulResult:
    """Output of a quantized matmul pipeline.

    ``int8_fraction`` is the share of inner-product terms computed in int8:
    1 - decomposed_cols / h when decomposition ran, else 1.
    """

    output: DenseMatrix
    scheme: str
    decomposed_cols: int = 0
    int8_fraction: float = 1.0


def _check_inner(x_cols: int, w_rows: int, shapes: str) -> None:
    if x_cols != w_rows:
        raise ShapeMismatchError(f"inner dimensions differ: {shapes}")
    if x_cols > MAX_INNER_DIM:
        raise GemmOverflowError(
            f"inner dimension {x_cols} exceeds the int32 overflow guard {MAX_INNER_DIM}"
        )


def _as_i32(acc: np.ndarray) -> Int32Matrix:
    if acc.min(initial=0) < _I32_MIN or acc.max(initial=0) > _I32_MAX:
        raise GemmOverflowError("accumulated values exceed the signed 32-bit range")
    return Int32Matrix(acc.astype(np.int32))


def int8_gemm_i32(a: Int8Matrix, b: Int8Matrix) -> Int32Matrix:
    """Exact integer product of int8 codes with 32-bit accumulation."""
    _check_inner(a.cols, b.rows, f"A is {a.rows}x{a.cols}, B is {b.rows}x{b.cols}")
    acc = a.data.astype(np.int64) @ b.data.astype(np.int64)
    return Int32Matrix(acc.astype(np.int32))


def zeropoint_gemm_i32(
    a: Int8Matrix, b: Int8Matrix, zp_a: int, zp_b: int, unrolled: bool = False
) -> Int32Matrix:
    """Integer product of zeropoint-shifted codes: (A + zp_a)(B + zp_b).

    The direct path multiplies the shifted values outright; the unrolled
    path expands into A@B + zp_b*rowsum(A) + zp_a*colsum(B) + h*zp_a*zp_b
    for hardware without a fused multiply-with-zeropoint. Exact integer
    arithmetic makes the two algebraically identical paths bit-identical.
    """
    _check_inner(a.cols, b.rows, f"A is {a.rows}x{a.cols}, B is {b.rows}x{b.cols}")
    a64 = a.data.astype(np.int64)
    b64 = b.data.astype(np.int64)
    if unrolled:
        acc = (
            a64 @ b64
            + zp_b * a64.sum(axis=1, keepdims=True)
            + zp_a * b64.sum(axis=0, keepdims=True)
            + a.cols * zp_a * zp_b
        )
    else:
        acc = (a64 + zp_a) @ (b64 + zp_b)
    return _as_i32(acc)


def ordered_matmul_f64(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Float64 matmul accumulating strictly in ascending inner-index order."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    acc = np.zeros((x.shape[0], w.shape[1]))
    for k in range(x.shape[1]):
        acc += np.multiply.outer(x[:, k], w[k, :])
    return acc


def dequantize_output(
    c: Int32Matrix, params_x: QuantParams, params_w: QuantParams
) -> DenseMatrix:
    """Divide an int32 accumulation by the operands' scaling constants.

    Tensor-wise params give a scalar divisor; row/column params give the
    outer product of the two scale vectors. Zeropoint params assume the
    accumulation already includes the zeropoint shift (the Eq.-style
    (A + zp_a)(B + zp_b) form).
    """
    acc = c.data.astype(np.float64)
    if isinstance(params_x, AbsmaxParams) and isinstance(params_w, AbsmaxParams):
        out = acc / (params_x.scale * params_w.scale)
    elif isinstance(params_x, ZeropointParams) and isinstance(params_w, ZeropointParams):
        out = acc / (params_x.nd * params_w.nd)
    elif isinstance(params_x, RowwiseParams) and isinstance(params_w, ColwiseParams):
        if params_x.scales.size != c.rows or params_w.scales.size != c.cols:
            raise ParamsMismatchError(
                f"scale vector lengths ({params_x.scales.size}, {params_w.scales.size}) "
                f"do not match output shape {c.shape}"
            )
        out = acc / np.multiply.outer(params_x.scales, params_w.scales)
    else:
        raise ParamsMismatchError(
            f"unsupported params pairing: {type(params_x).__name__} x "
            f"{type(params_w).__name__}"
        )
    return DenseMatrix(out.astype(np.float32))


def absmax_matmul(x: DenseMatrix, w: DenseMatrix) -> MatmulResult:
    """X @ W via tensor-wise absmax quantization of both operands."""
    _check_inner(x.cols, w.rows, f"X is {x.rows}x{x.cols}, W is {w.rows}x{w.cols}")
    qx = absmax_quantize(x)
    qw = absmax_quantize(w)
    c = int8_gemm_i32(qx.codes, qw.codes)
    return MatmulResult(dequantize_output(c, qx.params, qw.params), "absmax")


def zeropoint_matmul(x: DenseMatrix, w: DenseMatrix, unrolled: bool = False) -> MatmulResult:
    """X @ W via tensor-wise zeropoint quantization of both operands.

    ``unrolled=False`` multiplies the shifted codes (A + zp_a)(B + zp_b)
    directly, emulating a fused multiply-with-zeropoint instruction;
    ``unrolled=True`` expands the same product into its four terms for
    hardware without that instruction. Both paths accumulate exactly and
    produce bit-identical int32 results.
    """
    _check_inner(x.cols, w.rows, f"X is {x.rows}x{x.cols}, W is {w.rows}x{w.cols}")
    qx = zeropoint_quantize(x)
    qw = zeropoint_quantize(w)
    px: ZeropointParams = qx.params  # type: ignore[assignment]
    pw: ZeropointParams = qw.params  # type: ignore[assignment]
    h = x.cols
    c = zeropoint_gemm_i32(qx.codes, qw.codes, px.zp, pw.zp, unrolled=unrolled)

    out = c.data.astype(np.float64) / (px.nd * pw.nd)
    # Constant-tensor inputs carry an offset; correct with its cross terms.
    if px.offset != 0.0 or pw.offset != 0.0:
        ta = qx.codes.data.astype(np.int64) + px.zp
        tb = qw.codes.data.astype(np.int64) + pw.zp
        out = (
            out
            + (pw.offset / px.nd) * ta.sum(axis=1, keepdims=True)
            + (px.offset / pw.nd) * tb.sum(axis=0, keepdims=True)
            + px.offset * pw.offset * h
        )
    return MatmulResult(DenseMatrix(out.astype(np.float32)), "zeropoint")


def _vectorwise_core(x: DenseMatrix, w: DenseMatrix) -> DenseMatrix:
    qx = rowwise_quantize(x)
    qw = colwise_quantize(w)
    c = int8_gemm_i32(qx.codes, qw.codes)
    return dequantize_output(c, qx.params, qw.params)


def vectorwise_matmul(x: DenseMatrix, w: DenseMatrix) -> MatmulResult:
    """X @ W with per-row constants for X and per-column constants for W."""
    _check_inner(x.cols, w.rows, f"X is {x.rows}x{x.cols}, W is {w.rows}x{w.cols}")
    return MatmulResult(_vectorwise_core(x, w), "vectorwise")


def extract_outlier_columns(x: DenseMatrix, alpha: float = 6.0) -> OutlierSet:
    """Columns of X containing at least one value with |value| >= alpha.

    The comparison is inclusive: a value of exactly alpha marks its column.
    """
    if not (alpha > 0) or not np.isfinite(alpha):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    mask = (np.abs(x.data) >= alpha).any(axis=0)
    return OutlierSet(tuple(int(i) for i in np.flatnonzero(mask)), alpha)


def llm_int8_matmul(x: DenseMatrix, w: DenseMatrix, alpha: float = 6.0) -> MatmulResult:
    """Mixed-precision X @ W: outlier feature columns in float, the rest in int8.

    Columns of X holding any value with |value| >= alpha, and the matching
    rows of W, are gathered into contiguous sub-matrices and multiplied in
    high precision; the remaining columns/rows go through the vector-wise
    int8 path with constants recomputed on the sub-matrices. The two
    partial products are summed. With no outlier columns the result is
    bit-identical to vectorwise_matmul.
    """
    _check_inner(x.cols, w.rows, f"X is {x.rows}x{x.cols}, W is {w.rows}x{w.cols}")
    outliers = extract_outlier_columns(x, alpha)
    h = x.cols
    n_out = len(outliers)
    int8_fraction = 1.0 - n_out / h

    if n_out == 0:
        return MatmulResult(_vectorwise_core(x, w), "llm_int8", 0, 1.0)

    idx_out = np.fromiter(outliers.dims, dtype=np.intp)
    keep = np.ones(h, dtype=bool)
    keep[idx_out] = False
    idx_keep = np.flatnonzero(keep)

    hi = ordered_matmul_f64(x.data[:, idx_out], w.data[idx_out, :])
    if idx_keep.size == 0:
        out = hi
    else:
        x_rest = DenseMatrix(x.data[:, idx_keep])
        w_rest = DenseMatrix(w.data[idx_keep, :])
        out = _vectorwise_core(x_rest, w_rest).data.astype(np.float64) + hi
    return MatmulResult(
        DenseMatrix(out.astype(np.float32)), "llm_int8", n_out, int8_fraction
    )
