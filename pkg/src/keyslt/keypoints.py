"""Keypoint data model, pose-file ingestion and the canonical 55-point layout.

Canonical slot order:

    0-12   body   Nose, LEye, REye, LEar, REar, LShoulder, RShoulder, LElbow,
                  RElbow, LWrist, RWrist, Head, Neck
    13-33  left hand, wrist to fingertips
    34-54  right hand, wrist to fingertips

The built-in ``halpe136_default`` layout maps Halpe-136 output onto these
slots: body indices 0-10 map directly, Head (17) goes to slot 11 and Neck (18)
to slot 12.  The 13 lower-body points and the 68 face-mesh points are dropped.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyCorpus, LayoutMismatch, MalformedFile

NUM_POINTS = 55
FEATURE_DIM = 2 * NUM_POINTS
BODY_SLOTS = range(0, 13)
LEFT_HAND_SLOTS = range(13, 34)
RIGHT_HAND_SLOTS = range(34, 55)

BODY_NAMES = (
    "Nose", "LEye", "REye", "LEar", "REar", "LShoulder", "RShoulder",
    "LElbow", "RElbow", "LWrist", "RWrist", "Head", "Neck",
)


@dataclass(frozen=True)
class LayoutMap:
    name: str
    source_indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.source_indices)
        if len(idx) != NUM_POINTS:
            raise LayoutMismatch(f"layout {self.name!r} has {len(idx)} indices, expected {NUM_POINTS}")
        if len(set(idx)) != NUM_POINTS:
            raise LayoutMismatch(f"layout {self.name!r} has duplicate source indices")
        if min(idx) < 0:
            raise LayoutMismatch(f"layout {self.name!r} has negative source indices")
        object.__setattr__(self, "source_indices", idx)

    @property
    def min_points(self) -> int:
        return max(self.source_indices) + 1

    @classmethod
    def identity(cls) -> "LayoutMap":
        return cls("identity55", tuple(range(NUM_POINTS)))

    @classmethod
    def from_dict(cls, d: dict) -> "LayoutMap":
        try:
            return cls(str(d["name"]), tuple(d["source_indices"]))
        except (KeyError, TypeError) as exc:
            raise LayoutMismatch(f"invalid layout document: {exc}") from exc

    def to_dict(self) -> dict:
        return {"name": self.name, "source_indices": list(self.source_indices)}


def load_layout(spec: str | Path | None = None) -> LayoutMap:
    """Load a layout by built-in name or from a JSON file. ``None`` gives the Halpe default."""
    if spec is None or str(spec) == "halpe136_default":
        text = resources.files("keyslt").joinpath("layouts/halpe136_default.json").read_text()
        return LayoutMap.from_dict(json.loads(text))
    if str(spec) == "identity55":
        return LayoutMap.identity()
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"layout file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedFile(path, exc.lineno, f"invalid JSON: {exc.msg}") from exc
    return LayoutMap.from_dict(doc)


@dataclass
class KeypointVideo:
    """A signer video as a ``(T, 55, 2)`` array of canonical keypoints."""

    id: str
    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[1:] != (NUM_POINTS, 2):
            raise LayoutMismatch(f"video {self.id!r}: frames must have shape (T, 55, 2), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise MalformedFile(self.id, 0, "empty video")

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    def take(self, indices) -> "KeypointVideo":
        """Frames at the given 0-based indices, in the given order."""
        return KeypointVideo(self.id, self.frames[np.asarray(indices, dtype=np.int64)])


def select_canonical_55(raw: np.ndarray, layout: LayoutMap) -> np.ndarray:
    """Reduce a raw ``(K, 2|3)`` pose frame to the ``(55, 2)`` canonical frame."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] not in (2, 3):
        raise LayoutMismatch(f"raw frame must have shape (K, 2) or (K, 3), got {raw.shape}")
    if raw.shape[0] < layout.min_points:
        raise LayoutMismatch(
            f"frame has {raw.shape[0]} points but layout {layout.name!r} needs index {layout.min_points - 1}"
        )
    return raw[list(layout.source_indices), :2].copy()


def _parse_frame(obj, path, lineno) -> np.ndarray:
    if not isinstance(obj, dict) or "keypoints" not in obj:
        raise MalformedFile(path, lineno, "expected an object with a 'keypoints' array")
    if "frame" in obj and not isinstance(obj["frame"], int):
        raise MalformedFile(path, lineno, "'frame' must be an integer")
    kp = obj["keypoints"]
    if not isinstance(kp, list) or len(kp) == 0 or len(kp) % 3 != 0:
        raise MalformedFile(path, lineno, "'keypoints' must be a non-empty flat array of 3*K numbers")
    try:
        arr = np.asarray(kp, dtype=np.float64).reshape(-1, 3)
    except (TypeError, ValueError) as exc:
        raise MalformedFile(path, lineno, f"non-numeric keypoint value ({exc})") from exc
    if not np.all(np.isfinite(arr)):
        raise MalformedFile(path, lineno, "non-finite keypoint value")
    conf = arr[:, 2]
    if np.any(conf < 0.0) or np.any(conf > 1.0):
        raise MalformedFile(path, lineno, "confidence outside [0, 1]")
    return arr


def load_pose_video(path: str | Path, layout: LayoutMap, video_id: str | None = None) -> KeypointVideo:
    """Read a JSON-Lines keypoint file, one frame per line, into canonical form."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"keypoint file not found: {path}")
    frames = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedFile(path, lineno, f"invalid JSON: {exc.msg}") from exc
            raw = _parse_frame(obj, path, lineno)
            try:
                frames.append(select_canonical_55(raw, layout))
            except LayoutMismatch as exc:
                raise LayoutMismatch(f"{path}:{lineno}: {exc}") from exc
    if not frames:
        raise MalformedFile(path, 0, "empty video")
    return KeypointVideo(video_id or path.stem, np.stack(frames))


def write_pose_video(path: str | Path, frames: np.ndarray, confidence: float = 1.0) -> None:
    """Write ``(T, K, 2)`` keypoints in the JSON-Lines format read by :func:`load_pose_video`."""
    frames = np.asarray(frames, dtype=np.float64)
    with Path(path).open("w", encoding="utf-8") as fh:
        for t, frame in enumerate(frames):
            flat = []
            for x, y in frame:
                flat.extend((repr(float(x)), repr(float(y)), repr(float(confidence))))
            fh.write('{"frame": %d, "keypoints": [%s]}\n' % (t, ", ".join(flat)))


def flatten_frame(frame: np.ndarray) -> np.ndarray:
    """``(55, 2)`` -> 110 values: all x coordinates, then all y coordinates."""
    frame = np.asarray(frame, dtype=np.float64)
    return np.concatenate([frame[:, 0], frame[:, 1]])


def unflatten_frame(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.stack([values[:NUM_POINTS], values[NUM_POINTS:]], axis=1)


def flatten_video(frames: np.ndarray) -> np.ndarray:
    """``(T, 55, 2)`` -> ``(T, 110)``."""
    frames = np.asarray(frames, dtype=np.float64)
    return np.concatenate([frames[:, :, 0], frames[:, :, 1]], axis=1)


@dataclass(frozen=True)
class CorpusStats:
    video_count: int
    mean_frames: float
    median_frames: float
    chosen_N: int


def corpus_stats(lengths: Sequence[int] | Sequence[KeypointVideo], n_rule: str = "mean") -> CorpusStats:
    """Frame-count statistics and the fixed length N chosen by ``n_rule``.

    ``mean`` rounds half up; ``median`` takes the lower median.
    """
    counts = [v.T if isinstance(v, KeypointVideo) else int(v) for v in lengths]
    if not counts:
        raise EmptyCorpus("corpus_stats needs at least one video")
    mean = Fraction(sum(counts), len(counts))
    ordered = sorted(counts)
    lower_median = ordered[(len(ordered) - 1) // 2]
    if len(ordered) % 2:
        median = float(lower_median)
    else:
        median = (ordered[len(ordered) // 2 - 1] + ordered[len(ordered) // 2]) / 2
    if n_rule == "mean":
        chosen = math.floor(mean + Fraction(1, 2))
    elif n_rule == "median":
        chosen = lower_median
    else:
        raise ValueError(f"unknown n_rule {n_rule!r}")
    return CorpusStats(len(counts), float(mean), float(median), max(1, int(chosen)))
