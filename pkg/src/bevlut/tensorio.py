"""Minimal binary tensor container shared by the CLI, tests and bindings.

Layout (little-endian): magic ``FBTN``, u32 version=1, u32 rank,
u32 dims[rank], then f32 payload in row-major order. The payload is copied
bit-for-bit, so NaN/Inf patterns survive a round trip.
"""

from __future__ import annotations

import struct
from os import PathLike

import numpy as np

from .errors import (
    BadMagicError,
    DimsOverflowError,
    RankError,
    TruncatedStreamError,
    UnsupportedVersionError,
)

MAGIC = b"FBTN"
VERSION = 1
_MAX_ELEMS = 2**31


def encode_tensor(dims, data) -> bytes:
    dims = [int(d) for d in dims]
    if len(dims) < 1:
        raise RankError("rank must be >= 1")
    if any(d < 1 for d in dims):
        raise DimsOverflowError(f"dims must be positive, got {dims}")
    n = 1
    for d in dims:
        n *= d
    if n > _MAX_ELEMS:
        raise DimsOverflowError(f"dim product {n} exceeds {_MAX_ELEMS}")
    arr = np.asarray(data, dtype="<f4").reshape(-1)
    if arr.size != n:
        raise DimsOverflowError(f"payload has {arr.size} elements, dims imply {n}")
    header = MAGIC + struct.pack("<II", VERSION, len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    return header + arr.tobytes()


def decode_tensor(buf: bytes):
    """Returns (dims, data) with data as a float32 array of shape dims."""
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("bad magic: not a tensor stream")
    if len(buf) < 12:
        raise TruncatedStreamError("truncated stream: header incomplete")
    version, rank = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported tensor version {version}")
    if rank < 1:
        raise RankError("rank must be >= 1")
    if len(buf) < 12 + 4 * rank:
        raise TruncatedStreamError("truncated stream: dims incomplete")
    dims = struct.unpack_from(f"<{rank}I", buf, 12)
    n = 1
    for d in dims:
        n *= d
    if n > _MAX_ELEMS:
        raise DimsOverflowError(f"dim product {n} exceeds {_MAX_ELEMS}")
    off = 12 + 4 * rank
    if len(buf) < off + 4 * n:
        raise TruncatedStreamError(
            f"truncated stream: payload has {len(buf) - off} bytes, expected {4 * n}"
        )
    data = np.frombuffer(buf, dtype="<f4", count=n, offset=off).reshape(dims).copy()
    return tuple(int(d) for d in dims), data


def write_tensor(path: str | PathLike, dims, data) -> None:
    with open(path, "wb") as f:
        f.write(encode_tensor(dims, data))


def read_tensor(path: str | PathLike):
    with open(path, "rb") as f:
        return decode_tensor(f.read())
