"""Binary tensor container with a JSON metadata sidecar.

Layout (all integers little-endian): 8 magic bytes, uint32 version, uint8
dtype code (0 = float64, 1 = bool as one byte per value), uint64 mode count,
one uint64 extent per mode, then the values in row-major order (last index
fastest).  The sidecar ``<path>.json`` records shape, dtype, optional mode
names/units, and creation provenance.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Optional, Tuple

import numpy as np

MAGIC = b"GLOSSTEN"
VERSION = 1
_DTYPE_CODES = {0: np.dtype("<f8"), 1: np.dtype("u1")}


def _atomic_write(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)


def save_tensor(path: str, values: np.ndarray, metadata: Optional[dict] = None) -> None:
    """Persist a float64 or boolean array with its JSON sidecar."""
    values = np.asarray(values)
    if values.dtype == np.bool_:
        code, payload_dtype = 1, np.dtype("u1")
    else:
        code, payload_dtype = 0, np.dtype("<f8")
        values = values.astype(np.float64, copy=False)

    header = MAGIC + struct.pack("<IB", VERSION, code)
    header += struct.pack("<Q", values.ndim)
    header += struct.pack(f"<{values.ndim}Q", *values.shape)
    payload = np.ascontiguousarray(values).astype(payload_dtype, copy=False).tobytes()
    _atomic_write(path, header + payload)

    sidecar = dict(metadata or {})
    sidecar.setdefault("shape", list(values.shape))
    sidecar.setdefault("dtype", "bool" if code == 1 else "float64")
    tmp = path + ".json.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
    os.replace(tmp, path + ".json")


def load_tensor(path: str) -> Tuple[np.ndarray, dict]:
    """Load an array saved by :func:`save_tensor`; returns (values, metadata)."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) + 5 + 8 or blob[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a tensor container (bad magic)")
    offset = len(MAGIC)
    version, code = struct.unpack_from("<IB", blob, offset)
    offset += 5
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    if code not in _DTYPE_CODES:
        raise ValueError(f"{path}: unknown dtype code {code}")
    (ndim,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    shape = struct.unpack_from(f"<{ndim}Q", blob, offset)
    offset += 8 * ndim

    dtype = _DTYPE_CODES[code]
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    expected = offset + count * dtype.itemsize
    if len(blob) != expected:
        raise ValueError(f"{path}: truncated container ({len(blob)} bytes, expected {expected})")
    values = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
    if code == 1:
        values = values.astype(bool)
    else:
        values = values.astype(np.float64)

    metadata = {}
    sidecar = path + ".json"
    if os.path.exists(sidecar):
        with open(sidecar, "r", encoding="utf-8") as f:
            metadata = json.load(f)
    return values, metadata


def save_json(path: str, payload: dict) -> None:
    """Atomically write a JSON document."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    os.replace(tmp, path)


def load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
