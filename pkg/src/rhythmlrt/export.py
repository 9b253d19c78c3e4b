"""Binary export containers for encoded matrices.

Layout (all little-endian)::

    bytes 0..3    magic "LRT1"
    bytes 4..5    format version (u16)
    byte  6       dtype tag: 0 = f32, 1 = i32
    byte  7       reserved, zero
    bytes 8..11   rows (u32)
    bytes 12..15  cols (u32)
    bytes 16..    payload, row-major

Every ``.bin`` file has a JSON sidecar ``<name>.json`` holding the
metadata snapshot plus a SHA-256 checksum of the whole binary file.
Files are written atomically (temp file + rename) and reads verify the
declared sizes and the checksum.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import ExportError

MAGIC = b"LRT1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBBII")
_DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<i4")}


def _dtype_tag(array: np.ndarray) -> int:
    if array.dtype.kind == "f":
        return 0
    if array.dtype.kind in ("i", "u"):
        return 1
    raise ExportError(f"cannot export arrays of dtype {array.dtype}")


def _checksum(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def container_bytes(array: np.ndarray) -> bytes:
    """Serialize a 2-D array to the container format (f32 or i32)."""
    array = np.asarray(array)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise ExportError(f"expected a matrix, got shape {array.shape}")
    tag = _dtype_tag(array)
    payload = np.ascontiguousarray(array.astype(_DTYPE_TAGS[tag], copy=False)).tobytes()
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, tag, 0, array.shape[0], array.shape[1])
    return header + payload


def parse_container(data: bytes) -> np.ndarray:
    """Inverse of :func:`container_bytes`."""
    if len(data) < _HEADER.size:
        raise ExportError(f"container too short ({len(data)} bytes)")
    magic, version, tag, _, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ExportError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ExportError(f"unsupported container version {version}")
    if tag not in _DTYPE_TAGS:
        raise ExportError(f"unknown dtype tag {tag}")
    dtype = _DTYPE_TAGS[tag]
    expected = rows * cols * dtype.itemsize
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise ExportError(
            f"payload is {len(payload)} bytes but header declares {rows}x{cols} "
            f"({expected} bytes)"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(rows, cols).copy()


def _atomic_write(path: Path, data: bytes):
    temp = path.with_name(path.name + ".tmp")
    temp.write_bytes(data)
    os.replace(temp, path)


def write_container(path, array: np.ndarray, metadata: dict | None = None) -> Path:
    """Write ``array`` plus its JSON sidecar; returns the binary path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = container_bytes(array)
    _atomic_write(path, data)
    parsed = parse_container(data)
    sidecar = dict(metadata or {})
    sidecar.update(
        {
            "rows": int(parsed.shape[0]),
            "cols": int(parsed.shape[1]),
            "dtype": "f32" if parsed.dtype.kind == "f" else "i32",
            "checksum": _checksum(data),
        }
    )
    _atomic_write(
        path.with_suffix(path.suffix + ".json"),
        json.dumps(sidecar, indent=2, sort_keys=True).encode("utf-8") + b"\n",
    )
    return path


def read_container(path, verify: bool = True) -> tuple[np.ndarray, dict]:
    """Read a container and its sidecar, verifying the checksum."""
    path = Path(path)
    data = path.read_bytes()
    sidecar_path = path.with_suffix(path.suffix + ".json")
    metadata: dict = {}
    if sidecar_path.exists():
        metadata = json.loads(sidecar_path.read_text("utf-8"))
        if verify and metadata.get("checksum") not in (None, _checksum(data)):
            raise ExportError(f"checksum mismatch for {path}")
    array = parse_container(data)
    if metadata and (metadata.get("rows") != array.shape[0] or metadata.get("cols") != array.shape[1]):
        raise ExportError(f"sidecar shape disagrees with header for {path}")
    return array, metadata


def write_container_csv(path, array: np.ndarray, metadata: dict | None = None) -> Path:
    """Plain-text mirror of a container, for debugging."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = np.asarray(array)
    if array.ndim == 1:
        array = array[:, None]
    lines = []
    if metadata:
        lines.append("# " + json.dumps(metadata, sort_keys=True))
    for row in array:
        lines.append(",".join(repr(value) for value in row.tolist()))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))
    return path


def config_hash(snapshot: dict) -> str:
    """Stable hash of a JSON-serializable configuration snapshot."""
    canonical = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
