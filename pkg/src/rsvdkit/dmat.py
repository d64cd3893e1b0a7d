"""DMAT binary matrix files.

Layout: the 6 bytes ``b"DMAT1\\n"``, the row and column counts as
little-endian uint64, then ``rows * cols`` little-endian binary64 values in
row-major order. Nothing else: no padding and no trailing bytes.
"""

import os
import struct

import numpy as np

from .errors import DmatError

MAGIC = b"DMAT1\n"
HEADER_SIZE = len(MAGIC) + 16


def encode(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"DMAT holds non-empty 2-D matrices, got shape {a.shape}")
    rows, cols = a.shape
    return MAGIC + struct.pack("<QQ", rows, cols) + np.ascontiguousarray(a, dtype="<f8").tobytes()


def decode(data, path="<bytes>"):
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        # report the first byte that differs from the magic
        offset = next(
            (i for i, (x, y) in enumerate(zip(data, MAGIC)) if x != y),
            min(len(data), len(MAGIC)),
        )
        raise DmatError(path, offset, "bad magic, expected b'DMAT1\\n'")
    if len(data) < HEADER_SIZE:
        raise DmatError(path, len(data), f"truncated header, need {HEADER_SIZE} bytes")
    rows, cols = struct.unpack_from("<QQ", data, len(MAGIC))
    if rows < 1 or cols < 1:
        raise DmatError(path, len(MAGIC), f"invalid dimensions {rows}x{cols}")
    expected = HEADER_SIZE + 8 * rows * cols
    if len(data) < expected:
        raise DmatError(path, len(data), f"truncated payload, expected {expected} bytes for {rows}x{cols}")
    if len(data) > expected:
        raise DmatError(path, expected, f"{len(data) - expected} trailing bytes after payload")
    values = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=HEADER_SIZE)
    return values.astype(np.float64).reshape(rows, cols)


def write_dmat(path, a):
    with open(path, "wb") as fh:
        fh.write(encode(a))


def read_dmat(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return decode(data, os.fspath(path))
