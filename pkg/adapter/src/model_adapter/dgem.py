"""DGEM embedding file writer/reader.

Layout (little-endian): magic "DGEM", u32 version = 1, u32 N, u32 D,
N*D float32 row-major values, then N length-prefixed UTF-8 sample ids
(u32 length + bytes). Float32 end to end: no conversion loss.
"""

from __future__ import annotations

import struct
from typing import List, Sequence, Tuple

import numpy as np

MAGIC = b"DGEM"
VERSION = 1


def write_dgem(path, ids: Sequence[str], values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ValueError(f"embedding values must be 2-D, got shape {values.shape}")
    if len(ids) != values.shape[0]:
        raise ValueError(f"{len(ids)} ids for {values.shape[0]} rows")
    if not np.all(np.isfinite(values)):
        raise ValueError("embedding values must be finite")
    n, d = values.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, n, d))
        f.write(values.tobytes())
        for sid in ids:
            raw = str(sid).encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)


def read_dgem(path) -> Tuple[List[str], np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, n, d = struct.unpack_from("<III", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported DGEM version {version}")
    end = 16 + 4 * n * d
    if end > len(blob):
        raise ValueError(f"truncated payload: need {end} bytes, file has {len(blob)}")
    values = np.frombuffer(blob, dtype="<f4", count=n * d, offset=16).reshape(n, d).copy()
    ids = []
    pos = end
    for i in range(n):
        (length,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        ids.append(blob[pos : pos + length].decode("utf-8"))
        pos += length
    return ids, values
