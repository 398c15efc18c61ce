"""NCTD v1 tensor file format.

Layout: magic b"NCTD", u32 version (=1), u8 dtype code (1=float32, 2=float64),
u8 rank, rank x u64 extents, then the row-major payload.  All integers and
floats are little-endian.  Lossless round-trip is the contract.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"NCTD"
VERSION = 1
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODE_FOR = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


class FormatError(ValueError):
    """Malformed NCTD file."""


def write_nctd(path, array):
    arr = np.ascontiguousarray(array)
    if arr.dtype not in CODE_FOR:
        raise FormatError(f"unsupported dtype for NCTD: {arr.dtype} (field: dtype)")
    header = MAGIC + struct.pack("<IBB", VERSION, CODE_FOR[arr.dtype], arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def read_nctd(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r} (field: magic)")
    if len(blob) < 10:
        raise FormatError("truncated header (field: header)")
    version, code, rank = struct.unpack("<IBB", blob[4:10])
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION} (field: version)")
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code} (field: dtype)")
    dtype = DTYPE_CODES[code]
    need = 10 + 8 * rank
    if len(blob) < need:
        raise FormatError(f"truncated extents: expected {need} header bytes, got {len(blob)} (field: extents)")
    shape = struct.unpack(f"<{rank}Q", blob[10:need]) if rank else ()
    count = int(np.prod(shape)) if shape else 1
    expected = need + count * dtype.itemsize
    if len(blob) != expected:
        raise FormatError(
            f"payload size mismatch: expected {expected} bytes total, got {len(blob)} (field: payload)"
        )
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=need)
    return np.ascontiguousarray(data.reshape(shape).astype(dtype.newbyteorder("=")))
