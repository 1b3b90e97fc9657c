"""Frame selection: fixing every video to N frames.

SASS augments short videos (T < N) by duplicating frames drawn from a
median-reordered binomial mixture, and skip-samples long ones (T > N) along a
jittered arithmetic progression.  Random and stochastic baselines are kept for
ablations.  Samplers return 0-based frame indices in temporal order; the
``*_video`` helpers apply them.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    InvalidLp,
    InvalidN,
    InvalidProbability,
    LengthMismatch,
    TooShort,
    ZeroVariance,
)
from .keypoints import KeypointVideo

DEFAULT_LP = 17
EXACT_PMF_MAX_T = 64

SAMPLERS = ("skip", "stochastic_sample", "random_sample")
AUGMENTERS = ("stochastic_augment", "random_augment")
SELECTORS = ("sass",) + SAMPLERS + AUGMENTERS


@dataclass(frozen=True)
class ProbabilitySet:
    values: tuple[Fraction, ...]
    n: int

    @property
    def l_p(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SkipPlan:
    stride: int
    start: int
    base_indices: tuple[int, ...]
    jitter: tuple[int, ...]
    indices: tuple[int, ...]  # 1-based, after clamping


def derive_rng(seed: int, key: str = "") -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, key)``; stable across processes."""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int.from_bytes(digest[:8], "little")]))


# -- distributions -----------------------------------------------------------

def binomial_pmf_row(T: int, p: float) -> np.ndarray:
    """``probs[k] = C(T-1, k) p^k (1-p)^(T-1-k)`` for k in [0, T-1]."""
    if T < 1:
        raise InvalidN(f"T must be >= 1, got {T}")
    p = float(p)
    if not 0.0 < p < 1.0:
        raise InvalidProbability(f"p must lie in (0, 1), got {p}")
    n = T - 1
    if T <= EXACT_PMF_MAX_T:
        q = 1.0 - p
        return np.array([math.comb(n, k) * p**k * q ** (n - k) for k in range(T)])
    k = np.arange(T, dtype=np.float64)
    log_comb = math.lgamma(n + 1) - np.array([math.lgamma(i + 1) + math.lgamma(n - i + 1) for i in range(T)])
    return np.exp(log_comb + k * math.log(p) + (n - k) * math.log1p(-p))


def probability_set(l_p: int) -> ProbabilitySet:
    """The symmetric set {1/2} U {1/(m+2), (m+1)/(m+2) : m = 1..n}, n = (l_p - 1) / 2."""
    if isinstance(l_p, bool) or int(l_p) != l_p or l_p < 1 or l_p % 2 == 0:
        raise InvalidLp(f"l_p must be an odd integer >= 1, got {l_p!r}")
    n = (int(l_p) - 1) // 2
    values = {Fraction(1, 2)}
    for m in range(1, n + 1):
        values |= {Fraction(1, m + 2), Fraction(m + 1, m + 2)}
    return ProbabilitySet(tuple(sorted(values)), n)


def mixture_distribution(T: int, l_p: int = DEFAULT_LP) -> np.ndarray:
    """Plain average of the binomial rows over the probability set."""
    pset = probability_set(l_p)
    rows = [binomial_pmf_row(T, p) for p in pset.values]
    return np.sum(rows, axis=0) / pset.l_p


def median_reorder(probs: np.ndarray) -> np.ndarray:
    """Permute ``probs`` into a single peak at index floor(T/2).

    Values are dealt in ascending order, alternately to the next free slot from
    the left and from the right, so the largest values meet in the middle.
    """
    probs = np.asarray(probs, dtype=np.float64)
    out = np.empty_like(probs)
    left, right = 0, len(probs) - 1
    for i, v in enumerate(np.sort(probs, kind="stable")):
        if i % 2 == 0:
            out[left] = v
            left += 1
        else:
            out[right] = v
            right -= 1
    return out


def selection_distribution(T: int, l_p: int = DEFAULT_LP) -> np.ndarray:
    return median_reorder(mixture_distribution(T, l_p))


def kurtosis(probs: np.ndarray) -> float:
    """Fourth standardized moment of the frame-index distribution."""
    probs = np.asarray(probs, dtype=np.float64)
    if len(probs) < 2:
        raise ZeroVariance("kurtosis needs at least two outcomes")
    k = np.arange(len(probs), dtype=np.float64)
    mu = float(probs @ k)
    var = float(probs @ (k - mu) ** 2)
    if var <= 0.0:
        raise ZeroVariance("distribution has zero variance")
    return float(probs @ ((k - mu) ** 4)) / var**2


# -- index-level samplers ----------------------------------------------------

def augment_indices(T: int, N: int, draws) -> np.ndarray:
    """Duplicate each drawn frame next to its original.

    ``draws`` holds N - T 0-based frame indices (repeats allowed).
    """
    draws = np.asarray(draws, dtype=np.int64)
    if len(draws) != N - T:
        raise LengthMismatch(f"need {N - T} draws, got {len(draws)}")
    if len(draws) and (draws.min() < 0 or draws.max() >= T):
        raise LengthMismatch("draw index out of range")
    repeats = 1 + np.bincount(draws, minlength=T)
    return np.repeat(np.arange(T), repeats)


def _check_augment(T, N, dist=None):
    if T > N:
        raise LengthMismatch(f"augmentation needs T <= N, got T={T}, N={N}")
    if dist is not None and len(dist) != T:
        raise LengthMismatch(f"distribution has length {len(dist)}, video has {T} frames")


def stochastic_augment_indices(T: int, N: int, dist: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    _check_augment(T, N, dist)
    weights = median_reorder(dist)
    draws = rng.choice(T, size=N - T, replace=True, p=weights / weights.sum())
    return augment_indices(T, N, draws)


def random_augment_indices(T: int, N: int, rng: np.random.Generator) -> np.ndarray:
    _check_augment(T, N)
    return augment_indices(T, N, rng.integers(0, T, size=N - T))


def skip_plan(T: int, N: int, jitter) -> SkipPlan:
    """Arithmetic progression with per-element jitter, clamped to [1, T]."""
    if N < 2:
        raise InvalidN(f"skip sampling needs N >= 2, got {N}")
    if T < N:
        raise TooShort(f"skip sampling needs T >= N, got T={T}, N={N}")
    stride = T // (N - 1)
    start = (T - stride * (N - 1)) // 2
    jitter = tuple(int(r) for r in jitter)
    if len(jitter) != N or any(r < 1 or r > stride for r in jitter):
        raise ValueError(f"jitter must hold {N} integers in [1, {stride}]")
    base = tuple(start + k * stride for k in range(N))
    idx = tuple(min(max(b + r, 1), T) for b, r in zip(base, jitter))
    return SkipPlan(stride, start, base, jitter, idx)


def skip_sample_indices(T: int, N: int, rng: np.random.Generator) -> np.ndarray:
    if N < 2:
        raise InvalidN(f"skip sampling needs N >= 2, got {N}")
    if T < N:
        raise TooShort(f"skip sampling needs T >= N, got T={T}, N={N}")
    stride = T // (N - 1)
    plan = skip_plan(T, N, rng.integers(1, stride + 1, size=N))
    return np.asarray(plan.indices, dtype=np.int64) - 1


def weighted_sample_without_replacement(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sequential draws; once the remaining mass is zero, fall back to uniform."""
    w = np.array(weights, dtype=np.float64)
    chosen = []
    for _ in range(n):
        total = w.sum()
        if total > 0:
            probs = w / total
        else:
            probs = np.ones_like(w)
            probs[chosen] = 0.0
            probs /= probs.sum()
        j = int(rng.choice(len(w), p=probs))
        chosen.append(j)
        w[j] = 0.0
    return np.array(chosen, dtype=np.int64)


def stochastic_sample_indices(T: int, N: int, dist: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if T < N:
        raise TooShort(f"sampling needs T >= N, got T={T}, N={N}")
    if len(dist) != T:
        raise LengthMismatch(f"distribution has length {len(dist)}, video has {T} frames")
    return np.sort(weighted_sample_without_replacement(median_reorder(dist), N, rng))


def random_sample_indices(T: int, N: int, rng: np.random.Generator) -> np.ndarray:
    if T < N:
        raise TooShort(f"sampling needs T >= N, got T={T}, N={N}")
    return np.sort(rng.choice(T, size=N, replace=False))


def sass_indices(T: int, N: int, l_p: int, rng: np.random.Generator) -> np.ndarray:
    if N < 2:
        raise InvalidN(f"SASS needs N >= 2, got {N}")
    if T < N:
        return stochastic_augment_indices(T, N, mixture_distribution(T, l_p), rng)
    if T > N:
        return skip_sample_indices(T, N, rng)
    return np.arange(T)


def parse_selector(selector: str) -> tuple[str | None, str | None]:
    """Split a selector into ``(sampler, augmenter)``.

    ``sass`` is ``skip+stochastic_augment``; a single name leaves the other
    direction unsupported; ``a+b`` pairs any sampler with any augmenter.
    """
    if selector == "sass":
        return "skip", "stochastic_augment"
    parts = selector.split("+")
    sampler = augmenter = None
    for part in parts:
        if part in SAMPLERS and sampler is None:
            sampler = part
        elif part in AUGMENTERS and augmenter is None:
            augmenter = part
        else:
            raise ValueError(f"unknown selector {selector!r}; choose from {', '.join(SELECTORS)} or sampler+augmenter")
    return sampler, augmenter


def select_indices(T: int, N: int, selector: str = "sass", l_p: int = DEFAULT_LP,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """0-based indices fixing a T-frame video to N frames with ``selector``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if selector == "sass":
        return sass_indices(T, N, l_p, rng)
    sampler, augmenter = parse_selector(selector)
    if T == N:
        return np.arange(T)
    if T > N:
        if sampler is None:
            raise LengthMismatch(f"selector {selector!r} only augments, but T={T} > N={N}")
        if sampler == "skip":
            return skip_sample_indices(T, N, rng)
        if sampler == "stochastic_sample":
            return stochastic_sample_indices(T, N, mixture_distribution(T, l_p), rng)
        return random_sample_indices(T, N, rng)
    if augmenter is None:
        raise TooShort(f"selector {selector!r} only samples, but T={T} < N={N}")
    if augmenter == "stochastic_augment":
        return stochastic_augment_indices(T, N, mixture_distribution(T, l_p), rng)
    return random_augment_indices(T, N, rng)


# -- video-level wrappers ----------------------------------------------------

def stochastic_augment(video: KeypointVideo, N: int, dist: np.ndarray, rng) -> KeypointVideo:
    return video.take(stochastic_augment_indices(video.T, N, dist, rng))


def random_augment(video: KeypointVideo, N: int, rng) -> KeypointVideo:
    return video.take(random_augment_indices(video.T, N, rng))


def skip_sample(video: KeypointVideo, N: int, rng) -> KeypointVideo:
    return video.take(skip_sample_indices(video.T, N, rng))


def stochastic_sample(video: KeypointVideo, N: int, dist: np.ndarray, rng) -> KeypointVideo:
    return video.take(stochastic_sample_indices(video.T, N, dist, rng))


def random_sample(video: KeypointVideo, N: int, rng) -> KeypointVideo:
    return video.take(random_sample_indices(video.T, N, rng))


def sass(video: KeypointVideo, N: int, l_p: int = DEFAULT_LP, rng=None) -> KeypointVideo:
    rng = rng if rng is not None else np.random.default_rng(0)
    return video.take(sass_indices(video.T, N, l_p, rng))
