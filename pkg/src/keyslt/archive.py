"""Feature archive: one JSON header line, then row-major little-endian float64."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import MalformedFile

MAGIC = "keyslt-features"
VERSION = 1


def write_archive(path: str | Path, features: np.ndarray, header: dict) -> str:
    """Write the archive and return its SHA-256 hex digest."""
    features = np.ascontiguousarray(features, dtype="<f8")
    head = dict(header, format=MAGIC, version=VERSION, shape=list(features.shape), dtype="<f8")
    blob = (json.dumps(head, sort_keys=True) + "\n").encode("utf-8") + features.tobytes(order="C")
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def read_archive(path: str | Path) -> tuple[dict, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"feature archive not found: {path}")
    blob = path.read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise MalformedFile(path, 1, "missing header line")
    try:
        head = json.loads(blob[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFile(path, 1, f"bad header: {exc}") from exc
    if head.get("format") != MAGIC or head.get("dtype") != "<f8":
        raise MalformedFile(path, 1, "not a keyslt feature archive")
    shape = tuple(head["shape"])
    data = np.frombuffer(blob[nl + 1:], dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise MalformedFile(path, 2, f"payload holds {data.size} values, header declares shape {shape}")
    return head, data.reshape(shape).astype(np.float64)


def file_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
