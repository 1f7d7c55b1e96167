"""
Binary dump formats for gradients (debugging aid).

All integers are little-endian.

- ``DLG1``: magic, u8 version (1), u32 dim, dim x f64.
- ``DLS1``: magic, u32 dim, u32 entry count, count x (u32 index, i8 sign).
- ``DLT1``: magic, u32 dim, ceil(dim / 4) bytes of 2-bit codes
  (00 = 0, 01 = +1, 10 = -1); coordinate j sits in bits 2*(j % 4) of byte j // 4.

The noiseless vote tally (:class:`~topagg.core.types.VoteSum`) has no dump
format on purpose: it never leaves the aggregator.
"""

import struct

import numpy as np

from topagg.core.types import DenseGradient, SparseSignGradient, TernaryGradient, VectorLike, as_dense, as_ternary
from topagg.exceptions import ValidationError

DENSE_MAGIC = b"DLG1"
SPARSE_MAGIC = b"DLS1"
TERNARY_MAGIC = b"DLT1"
DENSE_VERSION = 1

_SPARSE_ENTRY = np.dtype([("index", "<u4"), ("sign", "i1")])
_TERNARY_CODES = {0: 0b00, 1: 0b01, -1: 0b10}


def _check_magic(data: bytes, magic: bytes) -> None:
    if data[:4] != magic:
        raise ValidationError(f"bad magic {data[:4]!r}, expected {magic!r}")


def encode_dense(g: VectorLike) -> bytes:
    arr = as_dense(g)
    return DENSE_MAGIC + struct.pack("<BI", DENSE_VERSION, arr.size) + arr.astype("<f8").tobytes()


def decode_dense(data: bytes) -> DenseGradient:
    _check_magic(data, DENSE_MAGIC)
    version, dim = struct.unpack_from("<BI", data, 4)
    if version != DENSE_VERSION:
        raise ValidationError(f"unsupported DLG version {version}")
    body = data[9:]
    if len(body) != 8 * dim:
        raise ValidationError(f"DLG payload holds {len(body)} bytes, expected {8 * dim}")
    return as_dense(np.frombuffer(body, dtype="<f8"))


def encode_sparse(g: SparseSignGradient) -> bytes:
    entries = np.empty(len(g), dtype=_SPARSE_ENTRY)
    entries["index"] = g.indices
    entries["sign"] = g.signs
    return SPARSE_MAGIC + struct.pack("<II", g.dim, len(g)) + entries.tobytes()


def decode_sparse(data: bytes) -> SparseSignGradient:
    _check_magic(data, SPARSE_MAGIC)
    dim, count = struct.unpack_from("<II", data, 4)
    body = data[12:]
    if len(body) != count * _SPARSE_ENTRY.itemsize:
        raise ValidationError("DLS payload length does not match entry count")
    entries = np.frombuffer(body, dtype=_SPARSE_ENTRY)
    return SparseSignGradient(dim=dim, indices=entries["index"].astype(np.int64), signs=entries["sign"].astype(np.int8))


def encode_ternary(g: VectorLike) -> bytes:
    arr = as_ternary(g)
    codes = np.zeros(4 * ((arr.size + 3) // 4), dtype=np.uint8)
    codes[: arr.size][arr == 1] = _TERNARY_CODES[1]
    codes[: arr.size][arr == -1] = _TERNARY_CODES[-1]
    quads = codes.reshape(-1, 4)
    packed = quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4) | (quads[:, 3] << 6)
    return TERNARY_MAGIC + struct.pack("<I", arr.size) + packed.astype(np.uint8).tobytes()


def decode_ternary(data: bytes) -> TernaryGradient:
    _check_magic(data, TERNARY_MAGIC)
    (dim,) = struct.unpack_from("<I", data, 4)
    packed = np.frombuffer(data[8:], dtype=np.uint8)
    if packed.size != (dim + 3) // 4:
        raise ValidationError("DLT payload length does not match dimension")
    codes = np.stack([(packed >> shift) & 0b11 for shift in (0, 2, 4, 6)], axis=1).reshape(-1)[:dim]
    if np.any(codes == 0b11):
        raise ValidationError("DLT payload holds the reserved code 11")
    out = np.zeros(dim, dtype=np.int8)
    out[codes == 0b01] = 1
    out[codes == 0b10] = -1
    return out
