"""Binary file formats shared by the pipeline stages.

All payloads are little-endian 32-bit floats in row-major order.  Gram
records and feature-map records carry a 16-byte header (4-byte ASCII
magic followed by three unsigned 32-bit integers); RDM files are raw
matrices with a JSON sidecar describing their contents.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from texgram.errors import DataError

GRAM_MAGIC = b"GRAM"
FMAP_MAGIC = b"FMAP"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIII")


def _write_record(path, magic, a, b, payload):
    payload = np.ascontiguousarray(payload, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, FORMAT_VERSION, a, b))
        fh.write(payload.tobytes())


def _read_record(path, magic):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated record (no header)")
    got_magic, version, a, b = _HEADER.unpack_from(raw)
    if got_magic != magic:
        raise DataError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    payload = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return a, b, payload


def save_gram_record(path, vector: np.ndarray, n: int) -> None:
    """Write a Gram vector (upper triangle incl. diagonal of an n x n Gram)."""
    vector = np.asarray(vector)
    expected = n * (n + 1) // 2
    if vector.size != expected:
        raise DataError(
            f"Gram vector length {vector.size} != n(n+1)/2 = {expected} for n={n}"
        )
    _write_record(path, GRAM_MAGIC, n, 0, vector)


def load_gram_record(path) -> tuple[np.ndarray, int]:
    """Read a Gram record, returning (vector, n)."""
    n, _reserved, payload = _read_record(path, GRAM_MAGIC)
    expected = n * (n + 1) // 2
    if payload.size != expected:
        raise DataError(
            f"{path}: payload length {payload.size} != n(n+1)/2 = {expected}"
        )
    return payload.copy(), n


def save_feature_map(path, data: np.ndarray) -> None:
    """Write a channels x samples activation matrix."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise DataError(f"feature map must be 2-D, got shape {data.shape}")
    _write_record(path, FMAP_MAGIC, data.shape[0], data.shape[1], data)


def load_feature_map(path) -> np.ndarray:
    """Read a channels x samples activation matrix."""
    channels, samples, payload = _read_record(path, FMAP_MAGIC)
    if payload.size != channels * samples:
        raise DataError(
            f"{path}: payload length {payload.size} != {channels}x{samples}"
        )
    return payload.reshape(channels, samples).copy()


def save_rdm_file(path, values: np.ndarray, sidecar: dict) -> None:
    """Write an S x S distance matrix plus its JSON sidecar.

    The binary file holds raw little-endian float32 values; metadata
    (size, layer, model, item ids, distance variant) goes to
    ``<path>.json``.
    """
    values = np.asarray(values)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DataError(f"RDM must be square, got shape {values.shape}")
    np.ascontiguousarray(values, dtype="<f4").tofile(path)
    meta = {"size": int(values.shape[0])}
    meta.update(sidecar)
    Path(str(path) + ".json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_rdm_file(path) -> tuple[np.ndarray, dict]:
    """Read an RDM binary plus sidecar, returning (values, metadata)."""
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise DataError(f"{path}: missing sidecar {sidecar_path}")
    meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
    size = int(meta["size"])
    values = np.fromfile(path, dtype="<f4")
    if values.size != size * size:
        raise DataError(f"{path}: expected {size}x{size} values, got {values.size}")
    return values.reshape(size, size).astype(np.float64), meta
