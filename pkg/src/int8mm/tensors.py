"""Matrix containers and deterministic random generation.

All containers are row-major, rank-2, and immutable after construction:
the backing numpy arrays are private copies with the write flag cleared,
so instances are safe to share across threads.

Quantized payloads use the symmetric int8 code range [-127, 127]; the
-128 code is rejected so every scheme stays symmetric around zero.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence

import numpy as np

INT8_CODE_MIN = -127
INT8_CODE_MAX = 127


class ShapeMismatchError(ValueError):
    """Operand shapes are not conformable for the requested operation."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, order="C", copy=True)
    out.setflags(write=False)
    return out


class DenseMatrix:
    """Row-major matrix of finite 32-bit floats.

    Stands in for the 16-bit-float operands of the quantized pipelines;
    ``to_f16_precision`` gives a variant with every entry rounded to the
    nearest representable half-precision value for fidelity experiments.
    """

    __slots__ = ("_data",)

    def __init__(self, data) -> None:
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"DenseMatrix requires a rank-2 array, got rank {arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"DenseMatrix dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("DenseMatrix rejects NaN/Inf entries")
        self._data = _frozen(arr)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def to_f16_precision(self) -> "DenseMatrix":
        """Round every entry to the nearest 16-bit float (simulate-f16 mode)."""
        return DenseMatrix(self._data.astype(np.float16).astype(np.float32))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseMatrix):
            return NotImplemented
        return np.array_equal(self._data, other._data)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"DenseMatrix({self.rows}x{self.cols})"


class Int8Matrix:
    """Row-major matrix of int8 codes restricted to [-127, 127]."""

    __slots__ = ("_data",)

    def __init__(self, data) -> None:
        arr = np.asarray(data)
        if arr.dtype.kind not in "iu":
            raise ValueError(f"Int8Matrix requires integer data, got dtype {arr.dtype}")
        if arr.ndim != 2:
            raise ValueError(f"Int8Matrix requires a rank-2 array, got rank {arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"Int8Matrix dimensions must be >= 1, got {arr.shape}")
        if arr.size and (arr.min() < INT8_CODE_MIN or arr.max() > INT8_CODE_MAX):
            raise ValueError(
                f"Int8Matrix values must lie in [{INT8_CODE_MIN}, {INT8_CODE_MAX}]"
            )
        self._data = _frozen(arr.astype(np.int8))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, Int8Matrix):
            return NotImplemented
        return np.array_equal(self._data, other._data)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Int8Matrix({self.rows}x{self.cols})"


class Int32Matrix:
    """Row-major matrix of int32 accumulator values."""

    __slots__ = ("_data",)

    def __init__(self, data) -> None:
        arr = np.asarray(data)
        if arr.dtype.kind not in "iu":
            raise ValueError(f"Int32Matrix requires integer data, got dtype {arr.dtype}")
        if arr.ndim != 2:
            raise ValueError(f"Int32Matrix requires a rank-2 array, got rank {arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"Int32Matrix dimensions must be >= 1, got {arr.shape}")
        info = np.iinfo(np.int32)
        if arr.size and (arr.min() < info.min or arr.max() > info.max):
            raise ValueError("Int32Matrix values exceed the signed 32-bit range")
        self._data = _frozen(arr.astype(np.int32))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, Int32Matrix):
            return NotImplemented
        return np.array_equal(self._data, other._data)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Int32Matrix({self.rows}x{self.cols})"


class HiddenStateStack:
    """Per-layer hidden states: L matrices that all share one s-by-h shape."""

    __slots__ = ("_mats",)

    def __init__(self, matrices: Sequence[DenseMatrix]) -> None:
        mats = tuple(matrices)
        if not mats:
            raise ValueError("HiddenStateStack requires at least one layer")
        for m in mats:
            if not isinstance(m, DenseMatrix):
                raise TypeError(f"HiddenStateStack holds DenseMatrix layers, got {type(m)!r}")
            if m.shape != mats[0].shape:
                raise ValueError(
                    f"all layers must share shape {mats[0].shape}, got {m.shape}"
                )
        self._mats = mats

    @property
    def layers(self) -> int:
        return len(self._mats)

    @property
    def seq(self) -> int:
        return self._mats[0].rows

    @property
    def hidden(self) -> int:
        return self._mats[0].cols

    def __len__(self) -> int:
        return len(self._mats)

    def __getitem__(self, index: int) -> DenseMatrix:
        return self._mats[index]

    def __iter__(self) -> Iterator[DenseMatrix]:
        return iter(self._mats)

    def as_array(self) -> np.ndarray:
        """Stack all layers into one (L, s, h) float32 array (copy)."""
        return np.stack([m.data for m in self._mats])

    def __repr__(self) -> str:
        return f"HiddenStateStack(L={self.layers}, s={self.seq}, h={self.hidden})"


def seeded_random_matrix(rows: int, cols: int, seed: int, stddev: float = 1.0) -> DenseMatrix:
    """Gaussian matrix that is a pure function of (rows, cols, seed, stddev).

    Bit-level procedure, fixed for reproducibility: a PCG64 bit generator is
    seeded directly with ``seed``, numpy's float32 ziggurat draws rows*cols
    standard normals in row-major order, and each value is scaled by
    float32(stddev). Identical arguments give bitwise-identical matrices on
    every platform.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    if not (seed >= 0):
        raise ValueError("seed must be a non-negative integer")
    if not np.isfinite(stddev) or stddev <= 0:
        raise ValueError(f"stddev must be positive and finite, got {stddev}")
    rng = np.random.Generator(np.random.PCG64(seed))
    vals = rng.standard_normal((rows, cols), dtype=np.float32) * np.float32(stddev)
    return DenseMatrix(vals)
