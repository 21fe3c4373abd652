"""Little-endian binary container shared by index and adapter files.

Layout::

    magic      4 bytes
    version    u32
    n_cols     u32
    n_rows     u64
    matrix     n_rows * n_cols float32, row-major
    n_strings  u64
    offsets    (n_strings + 1) u64, byte offsets into the blob
    blob       UTF-8
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ArtifactFormatError

VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_U64 = struct.Struct("<Q")


def pack(magic: bytes, matrix: np.ndarray, strings: list[str]) -> bytes:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    rows, cols = matrix.shape
    encoded = [s.encode("utf-8") for s in strings]
    offsets = np.zeros(len(encoded) + 1, dtype="<u8")
    np.cumsum([len(b) for b in encoded], out=offsets[1:])
    return b"".join(
        [
            _HEADER.pack(magic, VERSION, cols, rows),
            matrix.tobytes(),
            _U64.pack(len(encoded)),
            offsets.tobytes(),
            *encoded,
        ]
    )


def unpack(data: bytes, magic: bytes) -> tuple[np.ndarray, list[str]]:
    if len(data) < _HEADER.size:
        raise ArtifactFormatError("file too short for header")
    got_magic, version, cols, rows = _HEADER.unpack_from(data, 0)
    if got_magic != magic:
        raise ArtifactFormatError(f"bad magic {got_magic!r}, expected {magic!r}")
    if version != VERSION:
        raise ArtifactFormatError(f"unsupported version {version}")
    pos = _HEADER.size
    nbytes = rows * cols * 4
    if len(data) < pos + nbytes + _U64.size:
        raise ArtifactFormatError("truncated matrix")
    matrix = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=pos).reshape(rows, cols).copy()
    pos += nbytes
    (n_strings,) = _U64.unpack_from(data, pos)
    pos += _U64.size
    if len(data) < pos + (n_strings + 1) * 8:
        raise ArtifactFormatError("truncated string table")
    offsets = np.frombuffer(data, dtype="<u8", count=n_strings + 1, offset=pos)
    pos += (n_strings + 1) * 8
    blob = data[pos:]
    if len(blob) != int(offsets[-1]):
        raise ArtifactFormatError("string blob length mismatch")
    strings = [blob[int(a) : int(b)].decode("utf-8") for a, b in zip(offsets[:-1], offsets[1:])]
    return matrix, strings
