"""Frame-wise keypoint normalization.

``customized`` scales each body part by the distance between the frame center
and that part's reference point, and min-max scales each hand to [-0.5, 0.5].
The remaining schemes are the comparison baselines.  Every division is guarded:
a denominator below ``epsilon`` yields zeros for the affected group.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownScheme
from .keypoints import LEFT_HAND_SLOTS, NUM_POINTS, RIGHT_HAND_SLOTS

DEFAULT_EPS = 1e-6

SCHEMES = (
    "customized",
    "standard",
    "robust",
    "minmax",
    "fixed_right_shoulder",
    "all_reference",
    "center_reference",
)


@dataclass(frozen=True)
class PartReference:
    part: str
    reference_slot: int
    member_slots: tuple[int, ...]


PART_REFERENCES = (
    PartReference("Face", 0, (0, 1, 2, 3, 4, 11)),
    PartReference("UpperBody", 12, (5, 6, 12)),
    PartReference("LeftArm", 7, (7, 9)),
    PartReference("RightArm", 8, (8, 10)),
)
_LEFT_ARM = PART_REFERENCES[2]
_RIGHT_ARM = PART_REFERENCES[3]
RIGHT_SHOULDER_SLOT = 6


@dataclass(frozen=True)
class NormalizationScheme:
    kind: str = "customized"
    epsilon: float = DEFAULT_EPS
    joint_hands: bool = False

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise UnknownScheme(f"unknown normalization scheme {self.kind!r}; choose from {', '.join(SCHEMES)}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def center_point(frame: np.ndarray) -> np.ndarray:
    return np.asarray(frame, dtype=np.float64).mean(axis=0)


def part_distance(frame: np.ndarray, ref: PartReference) -> float:
    frame = np.asarray(frame, dtype=np.float64)
    c = center_point(frame)
    return float(np.hypot(*(c - frame[ref.reference_slot])))


def _scale_about_center(frame, slots, c, d, eps):
    if d < eps:
        return np.zeros((len(slots), 2))
    return (frame[list(slots)] - c) / d


def normalize_body_customized(frame: np.ndarray, refs=PART_REFERENCES, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Body slots 0-12 scaled per part.  Returns a ``(13, 2)`` array."""
    frame = np.asarray(frame, dtype=np.float64)
    c = center_point(frame)
    out = np.zeros((13, 2))
    for ref in refs:
        d = float(np.hypot(*(c - frame[ref.reference_slot])))
        out[list(ref.member_slots)] = _scale_about_center(frame, ref.member_slots, c, d, eps)
    return out


def _minmax(values: np.ndarray, lo: np.ndarray, hi: np.ndarray, eps: float) -> np.ndarray:
    span = hi - lo
    ok = span >= eps
    safe = np.where(ok, span, 1.0)
    return np.where(ok, (values - lo) / safe - 0.5, 0.0)


def normalize_hands_minmax(frame: np.ndarray, eps: float = DEFAULT_EPS, joint: bool = False) -> np.ndarray:
    """Hand slots 13-54, min-max scaled to [-0.5, 0.5] per hand and per axis.

    With ``joint=True`` both hands share one min/max per axis.  Returns ``(42, 2)``.
    """
    frame = np.asarray(frame, dtype=np.float64)
    left = frame[LEFT_HAND_SLOTS.start:LEFT_HAND_SLOTS.stop]
    right = frame[RIGHT_HAND_SLOTS.start:RIGHT_HAND_SLOTS.stop]
    if joint:
        both = frame[LEFT_HAND_SLOTS.start:RIGHT_HAND_SLOTS.stop]
        return _minmax(both, both.min(axis=0), both.max(axis=0), eps)
    return np.concatenate([
        _minmax(left, left.min(axis=0), left.max(axis=0), eps),
        _minmax(right, right.min(axis=0), right.max(axis=0), eps),
    ])


def normalize_customized(frame: np.ndarray, eps: float = DEFAULT_EPS, joint_hands: bool = False) -> np.ndarray:
    return np.concatenate([
        normalize_body_customized(frame, eps=eps),
        normalize_hands_minmax(frame, eps=eps, joint=joint_hands),
    ])


def _standard(frame, eps):
    mu = frame.mean(axis=0)
    sigma = frame.std(axis=0)
    ok = sigma >= eps
    return np.where(ok, (frame - mu) / np.where(ok, sigma, 1.0), 0.0)


def _robust(frame, eps):
    q1, med, q3 = np.percentile(frame, [25, 50, 75], axis=0)
    iqr = q3 - q1
    ok = iqr >= eps
    return np.where(ok, (frame - med) / np.where(ok, iqr, 1.0), 0.0)


def _fixed_right_shoulder(frame, eps):
    c = center_point(frame)
    d = float(np.hypot(*(c - frame[RIGHT_SHOULDER_SLOT])))
    return _scale_about_center(frame, range(NUM_POINTS), c, d, eps)


def _all_reference(frame, eps):
    c = center_point(frame)
    out = np.empty((NUM_POINTS, 2))
    out[:13] = normalize_body_customized(frame, eps=eps)
    for slots, ref in ((LEFT_HAND_SLOTS, _LEFT_ARM), (RIGHT_HAND_SLOTS, _RIGHT_ARM)):
        d = float(np.hypot(*(c - frame[ref.reference_slot])))
        out[slots.start:slots.stop] = _scale_about_center(frame, slots, c, d, eps)
    return out


def _center_reference(frame, eps):
    diff = frame - center_point(frame)
    dist = np.hypot(diff[:, 0], diff[:, 1])[:, None]
    ok = dist >= eps
    return np.where(ok, diff / np.where(ok, dist, 1.0), 0.0)


_BASELINES = {
    "standard": _standard,
    "robust": _robust,
    "minmax": lambda f, eps: _minmax(f, f.min(axis=0), f.max(axis=0), eps),
    "fixed_right_shoulder": _fixed_right_shoulder,
    "all_reference": _all_reference,
    "center_reference": _center_reference,
}


def normalize_baseline(frame: np.ndarray, scheme: NormalizationScheme | str) -> np.ndarray:
    if isinstance(scheme, str):
        scheme = NormalizationScheme(scheme)
    try:
        fn = _BASELINES[scheme.kind]
    except KeyError:
        raise UnknownScheme(f"{scheme.kind!r} is not a baseline scheme") from None
    return fn(np.asarray(frame, dtype=np.float64), scheme.epsilon)


def normalize(frame: np.ndarray, scheme: NormalizationScheme | str = "customized") -> np.ndarray:
    """Normalize one ``(55, 2)`` frame with any supported scheme."""
    if isinstance(scheme, str):
        scheme = NormalizationScheme(scheme)
    if scheme.kind == "customized":
        return normalize_customized(frame, eps=scheme.epsilon, joint_hands=scheme.joint_hands)
    return normalize_baseline(frame, scheme)


def normalize_video(frames: np.ndarray, scheme: NormalizationScheme | str = "customized") -> np.ndarray:
    """Apply :func:`normalize` to every frame of a ``(T, 55, 2)`` array."""
    if isinstance(scheme, str):
        scheme = NormalizationScheme(scheme)
    return np.stack([normalize(f, scheme) for f in np.asarray(frames, dtype=np.float64)])
