"""Quantization schemes: absmax, zeropoint, row-wise, and vector-wise.

Every scheme maps a DenseMatrix onto int8 codes in [-127, 127] plus the
scaling constants needed to undo the mapping. Rounding is always
round-half-away-from-zero, applied in float64, so results are bit-exact
and identical across schemes and platforms.

Degenerate inputs are handled uniformly rather than rejected: an all-zero
tensor (or row) quantizes with scale 1 to all-zero codes, and a constant
tensor under the zeropoint scheme records the constant as an offset so
dequantization reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import DenseMatrix, Int8Matrix, ShapeMismatchError

ZP_INT16_MIN = -(1 << 15)
ZP_INT16_MAX = (1 << 15) - 1


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to the nearest integer with ties away from zero (float64)."""
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


@dataclass(frozen=True)
class AbsmaxParams:
    """Tensor-wise symmetric scale: codes = round(scale * x), scale = 127 / max|x|."""

    scale: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValueError(f"scale must be positive and finite, got {self.scale}")


@dataclass(frozen=True)
class ZeropointParams:
    """Affine scale/shift: stored code = round(nd * x) - zp, zp a 16-bit integer.

    ``offset`` is nonzero only for constant inputs, where nd = 1, zp = 0 and
    the constant itself is carried so dequantization is exact.
    """

    nd: float
    zp: int
    offset: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.nd) or self.nd <= 0:
            raise ValueError(f"nd must be positive and finite, got {self.nd}")
        if not (ZP_INT16_MIN <= self.zp <= ZP_INT16_MAX):
            raise ValueError(f"zeropoint {self.zp} outside the signed 16-bit range")
        if not np.isfinite(self.offset):
            raise ValueError("offset must be finite")


def _validated_scales(scales, what: str) -> np.ndarray:
    arr = np.array(scales, dtype=np.float64, copy=True)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{what} must be a non-empty vector")
    if not np.isfinite(arr).all() or (arr <= 0).any():
        raise ValueError(f"{what} must all be positive and finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RowwiseParams:
    """One absmax scale per row (the activation side of vector-wise)."""

    scales: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", _validated_scales(self.scales, "row scales"))


@dataclass(frozen=True, eq=False)
class ColwiseParams:
    """One absmax scale per column (the weight side of vector-wise)."""

    scales: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", _validated_scales(self.scales, "column scales"))


QuantParams = AbsmaxParams | ZeropointParams | RowwiseParams | ColwiseParams


@dataclass(frozen=True, eq=False)
class QuantizedTensor:
    """Int8 codes paired with the constants that dequantize them."""

    codes: Int8Matrix
    params: QuantParams

    def __post_init__(self) -> None:
        if isinstance(self.params, RowwiseParams) and self.params.scales.size != self.codes.rows:
            raise ValueError("row scale count must equal the number of rows")
        if isinstance(self.params, ColwiseParams) and self.params.scales.size != self.codes.cols:
            raise ValueError("column scale count must equal the number of columns")

    @property
    def source_shape(self) -> tuple[int, int]:
        return self.codes.shape


def _to_codes(scaled: np.ndarray) -> Int8Matrix:
    rounded = round_half_away(scaled)
    return Int8Matrix(np.clip(rounded, -127, 127).astype(np.int64))


def absmax_quantize(x: DenseMatrix) -> QuantizedTensor:
    """Symmetric tensor-wise quantization by 127 over the max absolute value.

    The entries attaining max|x| map to exactly +/-127. An all-zero input
    uses scale 1 and all-zero codes.
    """
    data = x.data.astype(np.float64)
    amax = float(np.abs(data).max())
    if amax == 0.0:
        return QuantizedTensor(
            Int8Matrix(np.zeros(x.shape, dtype=np.int8)), AbsmaxParams(1.0)
        )
    scale = 127.0 / amax
    return QuantizedTensor(_to_codes(scale * data), AbsmaxParams(scale))


def zeropoint_quantize(x: DenseMatrix) -> QuantizedTensor:
    """Asymmetric quantization spanning [-127, 127] over the full input range.

    nd = 254 / (max - min) scales the range onto 254 steps; the zeropoint
    zp = round(nd * min) + 127 shifts true codes so the minimum stores as
    -127 and the maximum as +127. Stored codes are the shifted values
    round(nd * x) - zp; range-edge rounding ties clip into [-127, 127] at a
    cost of at most half a step.
    """
    data = x.data.astype(np.float64)
    lo = float(data.min())
    hi = float(data.max())
    if hi == lo:
        # Constant tensor: carry the constant as an offset, codes all zero.
        return QuantizedTensor(
            Int8Matrix(np.zeros(x.shape, dtype=np.int8)),
            ZeropointParams(nd=1.0, zp=0, offset=lo),
        )
    nd = 254.0 / (hi - lo)
    zp = int(round_half_away(np.float64(nd * lo))) + 127
    if not (ZP_INT16_MIN <= zp <= ZP_INT16_MAX):
        raise ValueError(
            f"input offset too extreme for a 16-bit zeropoint (zp={zp}); "
            "center the data or use absmax quantization"
        )
    stored = round_half_away(nd * data) - zp
    return QuantizedTensor(
        Int8Matrix(np.clip(stored, -127, 127).astype(np.int64)),
        ZeropointParams(nd=nd, zp=zp),
    )


def _axis_absmax_scales(data: np.ndarray, axis: int) -> np.ndarray:
    amax = np.abs(data).max(axis=axis)
    amax[amax == 0.0] = 127.0  # all-zero slice quantizes with scale 1
    return 127.0 / amax


def rowwise_quantize(x: DenseMatrix) -> QuantizedTensor:
    """Absmax quantization applied independently to each row."""
    data = x.data.astype(np.float64)
    scales = _axis_absmax_scales(data, axis=1)
    codes = _to_codes(data * scales[:, None])
    return QuantizedTensor(codes, RowwiseParams(scales))


def colwise_quantize(w: DenseMatrix) -> QuantizedTensor:
    """Absmax quantization applied independently to each column."""
    data = w.data.astype(np.float64)
    scales = _axis_absmax_scales(data, axis=0)
    codes = _to_codes(data * scales[None, :])
    return QuantizedTensor(codes, ColwiseParams(scales))


def vectorwise_params(
    x: DenseMatrix, w: DenseMatrix
) -> tuple[QuantizedTensor, QuantizedTensor]:
    """Quantize an (X, W) matmul pair with per-row / per-column constants.

    X gets one scale per row and W one scale per column; together the two
    scale vectors form the outer product that dequantizes the int32 output.
    """
    if x.cols != w.rows:
        raise ShapeMismatchError(
            f"inner dimensions differ: X is {x.rows}x{x.cols}, W is {w.rows}x{w.cols}"
        )
    return rowwise_quantize(x), colwise_quantize(w)


def dequantize(q: QuantizedTensor) -> DenseMatrix:
    """Invert a quantization, up to the scheme's rounding error."""
    codes = q.codes.data.astype(np.float64)
    params = q.params
    if isinstance(params, AbsmaxParams):
        values = codes / params.scale
    elif isinstance(params, ZeropointParams):
        values = (codes + params.zp) / params.nd + params.offset
    elif isinstance(params, RowwiseParams):
        values = codes / params.scales[:, None]
    elif isinstance(params, ColwiseParams):
        values = codes / params.scales[None, :]
    else:  # pragma: no cover - union is closed
        raise TypeError(f"unknown params type {type(params)!r}")
    return DenseMatrix(values.astype(np.float32))
