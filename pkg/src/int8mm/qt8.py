"""QT8 binary tensor file format.

Layout, all little-endian, no padding or checksum:

    offset  size  field
    0       4     magic bytes 51 54 38 00 ("QT8\\0")
    4       4     u32 version (= 1)
    8       1     u8 dtype code (0 = f32, 1 = i8, 2 = i32)
    9       1     u8 ndims (= 2)
    10      8     u64 rows
    18      8     u64 cols
    26      -     raw row-major payload

Round-trips are bit-exact for every supported dtype.
"""

from __future__ import annotations

import struct
from os import PathLike

import numpy as np

from .tensors import DenseMatrix, Int8Matrix, Int32Matrix

MAGIC = b"QT8\x00"
VERSION = 1

_HEADER = struct.Struct("<4sIBBQQ")

_DTYPE_CODES: dict[type, int] = {DenseMatrix: 0, Int8Matrix: 1, Int32Matrix: 2}
_WIRE_DTYPES: dict[int, np.dtype] = {
    0: np.dtype("<f4"),
    1: np.dtype("i1"),
    2: np.dtype("<i4"),
}
_CONTAINERS = {0: DenseMatrix, 1: Int8Matrix, 2: Int32Matrix}

Matrix = DenseMatrix | Int8Matrix | Int32Matrix


class QT8Error(Exception):
    """Base class for QT8 file format errors."""


class BadMagicError(QT8Error):
    """File does not start with the QT8 magic bytes."""


class UnsupportedVersionError(QT8Error):
    """File declares a format version this reader does not understand."""


class UnknownDtypeError(QT8Error):
    """File declares a dtype code outside {0, 1, 2}."""


class TruncatedFileError(QT8Error):
    """File ends before the declared payload is complete."""


def write_tensor(path: str | PathLike, matrix: Matrix) -> None:
    """Write a matrix to ``path`` in QT8 v1 format."""
    code = _DTYPE_CODES.get(type(matrix))
    if code is None:
        raise TypeError(f"cannot serialize {type(matrix)!r} as QT8")
    header = _HEADER.pack(MAGIC, VERSION, code, 2, matrix.rows, matrix.cols)
    payload = np.ascontiguousarray(matrix.data, dtype=_WIRE_DTYPES[code]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path: str | PathLike) -> Matrix:
    """Read a QT8 file back into its matrix container.

    Raises BadMagicError, UnsupportedVersionError, UnknownDtypeError or
    TruncatedFileError depending on which part of the file is malformed.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a QT8 file (bad magic bytes)")
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated at {len(raw)} bytes")
    _, version, code, ndims, rows, cols = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, expected {VERSION}")
    if code not in _WIRE_DTYPES:
        raise UnknownDtypeError(f"{path}: unknown dtype code {code}")
    if ndims != 2:
        raise QT8Error(f"{path}: ndims must be 2, got {ndims}")
    wire = _WIRE_DTYPES[code]
    expected = rows * cols * wire.itemsize
    body = raw[_HEADER.size :]
    if len(body) < expected:
        raise TruncatedFileError(
            f"{path}: payload has {len(body)} bytes, expected {expected}"
        )
    if len(body) > expected:
        raise QT8Error(f"{path}: {len(body) - expected} trailing bytes after payload")
    arr = np.frombuffer(body, dtype=wire).reshape(rows, cols)
    return _CONTAINERS[code](arr)
