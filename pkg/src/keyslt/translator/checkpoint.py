"""JSON checkpoints.  Floats are written with 17 significant digits so a
save/load cycle reproduces every double exactly."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import MalformedFile
from .model import ModelHyper, param_shapes

FORMAT_VERSION = 1


def _encode_array(a: np.ndarray) -> str:
    if a.ndim == 1:
        return "[" + ", ".join(format(float(x), ".17g") for x in a) + "]"
    return "[" + ", ".join(_encode_array(row) for row in a) + "]"


def dumps_checkpoint(params, hyper: ModelHyper, vocab: list[str], extra: dict | None = None) -> str:
    head = {"format_version": FORMAT_VERSION, "hyper": hyper.to_dict(), "vocab": list(vocab)}
    if extra:
        head.update(extra)
    parts = [json.dumps(k) + ": " + json.dumps(v, sort_keys=True) for k, v in head.items()]
    body = ",\n  ".join(f"{json.dumps(name)}: {_encode_array(params[name])}" for name in sorted(params))
    parts.append('"params": {\n  ' + body + "\n}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def save_checkpoint(path, params, hyper, vocab, extra=None) -> None:
    Path(path).write_text(dumps_checkpoint(params, hyper, vocab, extra), encoding="utf-8")


def load_checkpoint(path):
    """Returns ``(params, hyper, vocab, doc)``; ``doc`` carries any extra keys."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedFile(path, exc.lineno, f"invalid JSON: {exc.msg}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise MalformedFile(path, 1, f"unsupported format_version {doc.get('format_version')!r}")
    hyper = ModelHyper.from_dict(doc["hyper"])
    shapes = param_shapes(hyper)
    params = {}
    for name, shape in shapes.items():
        if name not in doc["params"]:
            raise MalformedFile(path, 1, f"missing parameter {name}")
        arr = np.asarray(doc["params"][name], dtype=np.float64)
        if arr.shape != shape:
            raise MalformedFile(path, 1, f"parameter {name} has shape {arr.shape}, expected {shape}")
        params[name] = arr
    return params, hyper, doc["vocab"], doc
