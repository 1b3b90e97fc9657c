"""Tokenization, vocabulary, manifests and the synthetic keypoint corpus."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigInvalid, MalformedManifest
from .keypoints import load_layout, write_pose_video
from .selection import derive_rng
from .translator.model import EOS, PAD, SOS, UNK

RESERVED = ("<pad>", "<sos>", "<eos>", "<unk>")
SPLITS = ("train", "dev", "test")
MANIFEST_COLUMNS = ("video_id", "keypoint_path", "sentence", "split")


def tokenize_whitespace(text: str) -> list[str]:
    return [t.lower() for t in text.split()]


class Vocab:
    """Token <-> id map with fixed reserved ids 0=PAD, 1=SOS, 2=EOS, 3=UNK."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(RESERVED)}
        for t in tokens:
            if t not in self.stoi:
                self.stoi[t] = len(self.itos)
                self.itos.append(t)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id(t) for t in tokens] + [EOS]

    def decode(self, ids: Sequence[int]) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if i == EOS:
                break
            if i in (PAD, SOS):
                continue
            out.append(self.itos[i] if 0 <= i < len(self.itos) else RESERVED[UNK])
        return out

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, itos: Sequence[str]) -> "Vocab":
        if tuple(itos[:4]) != RESERVED:
            raise ValueError("vocabulary must start with the reserved tokens")
        return cls(itos[4:])


def build_vocab(sentences: Iterable[Sequence[str] | str], min_count: int = 1) -> Vocab:
    """Tokens seen at least ``min_count`` times, by descending frequency then lexicographically."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter = Counter()
    for s in sentences:
        counts.update(tokenize_whitespace(s) if isinstance(s, str) else s)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab(kept)


def encode_tokens(vocab: Vocab, tokens: Sequence[str]) -> list[int]:
    return vocab.encode(tokens)


def decode_ids(vocab: Vocab, ids: Sequence[int]) -> list[str]:
    return vocab.decode(ids)


@dataclass(frozen=True)
class ManifestRow:
    video_id: str
    keypoint_path: Path
    sentence: str
    split: str


class Manifest(list):
    def split(self, name: str) -> list[ManifestRow]:
        return [r for r in self if r.split == name]


def load_manifest(path: str | Path, check_files: bool = True) -> Manifest:
    """Read a TSV manifest; relative keypoint paths resolve against its directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    rows = Manifest()
    seen: set[str] = set()
    with path.open(encoding="utf-8", newline="") as fh:
        for rowno, cols in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), start=1):
            if not cols or (len(cols) == 1 and not cols[0].strip()):
                continue
            if rowno == 1 and tuple(cols) == MANIFEST_COLUMNS:
                continue
            if len(cols) != 4:
                raise MalformedManifest(path, rowno, min(len(cols) + 1, 4), f"expected 4 columns, found {len(cols)}")
            vid, kp, sentence, split = cols
            if not vid:
                raise MalformedManifest(path, rowno, 1, "empty video_id")
            if vid in seen:
                raise MalformedManifest(path, rowno, 1, f"duplicate video_id {vid!r}")
            if split not in SPLITS:
                raise MalformedManifest(path, rowno, 4, f"split must be one of {SPLITS}, got {split!r}")
            kp_path = Path(kp) if Path(kp).is_absolute() else path.parent / kp
            if check_files and not kp_path.exists():
                raise FileNotFoundError(f"{path}: row {rowno}: keypoint file not found: {kp_path}")
            seen.add(vid)
            rows.append(ManifestRow(vid, kp_path, sentence, split))
    return rows


def write_manifest(path: str | Path, rows: Iterable[ManifestRow]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(MANIFEST_COLUMNS) + "\n")
        for r in rows:
            kp = Path(r.keypoint_path)
            try:
                kp = kp.relative_to(path.parent)
            except ValueError:
                pass
            fh.write(f"{r.video_id}\t{kp.as_posix()}\t{r.sentence}\t{r.split}\n")


def split_counts(n: int) -> tuple[int, int, int]:
    """8:1:1 train/dev/test sizes."""
    n_dev = round(n * 0.1)
    n_test = round(n * 0.1)
    return n - n_dev - n_test, n_dev, n_test


# -- synthetic corpus --------------------------------------------------------

@dataclass
class SynthConfig:
    vocab_size: int = 20
    min_len: int = 2
    max_len: int = 5
    videos: int = 200
    frames_per_token: int = 6
    transition_frames: int = 2
    rest_frames: int = 3
    noise_sigma: float = 1.0
    hand_size: float = 80.0
    seed: int = 0

    def validate(self):
        for f in ("vocab_size", "min_len", "max_len", "videos", "frames_per_token"):
            if getattr(self, f) < 1:
                raise ConfigInvalid(f"{f} must be positive")
        if self.transition_frames < 0 or self.rest_frames < 0:
            raise ConfigInvalid("transition_frames and rest_frames must be >= 0")
        if self.min_len > self.max_len:
            raise ConfigInvalid("min_len must not exceed max_len")
        if self.noise_sigma < 0:
            raise ConfigInvalid("noise_sigma must be >= 0")
        if not self.hand_size > 0:
            raise ConfigInvalid("hand_size must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


# Halpe-136 positions for the body (pixels, 640x480 frame); unlisted indices
# get a fixed position near the corresponding body region.
_BODY = {
    0: (320, 120), 1: (332, 110), 2: (308, 110), 3: (345, 115), 4: (295, 115),
    5: (380, 200), 6: (260, 200), 7: (400, 290), 8: (240, 290), 9: (410, 360),
    10: (230, 360), 11: (355, 380), 12: (285, 380), 13: (360, 460), 14: (280, 460),
    15: (360, 540), 16: (280, 540), 17: (320, 80), 18: (320, 190), 19: (320, 380),
}
_LEFT_HAND_ANCHOR = np.array([400.0, 330.0])
_RIGHT_HAND_ANCHOR = np.array([200.0, 300.0])


def point_set_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Root-mean-square distance between corresponding points."""
    return float(np.sqrt(((a - b) ** 2).sum(axis=1).mean()))


def token_prototypes(config: SynthConfig) -> np.ndarray:
    """One 21-point right-hand constellation per token, ``(vocab_size, 21, 2)``.

    Rejection-sampled so every pair is more than ``10 * noise_sigma`` apart.
    """
    rng = derive_rng(config.seed, "prototypes")
    min_sep = max(10.0 * config.noise_sigma, 0.05 * config.hand_size)
    protos: list[np.ndarray] = []
    while len(protos) < config.vocab_size:
        cand = rng.uniform(0.0, config.hand_size, size=(21, 2))
        if all(point_set_distance(cand, p) > min_sep for p in protos):
            protos.append(cand)
    return np.stack(protos)


def _base_frame(rng) -> np.ndarray:
    raw = np.zeros((136, 2))
    for i in range(136):
        raw[i] = _BODY.get(i, (320.0, 120.0))
    # face mesh: a ring around the nose; lower-body extras near the ankles
    angles = np.linspace(0, 2 * np.pi, 68, endpoint=False)
    raw[26:94] = np.array(_BODY[0]) + 25 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    raw[20:26] = [(360, 555), (280, 555), (370, 550), (270, 550), (355, 545), (285, 545)]
    raw[94:115] = _LEFT_HAND_ANCHOR + rng.uniform(0.0, 40.0, size=(21, 2))
    return raw


def _sentence(rng, length: int, vocab_size: int) -> list[int]:
    # consecutive repeats would merge into one longer hold and be unreadable
    toks = [int(rng.integers(0, vocab_size))]
    while len(toks) < length:
        t = int(rng.integers(0, vocab_size))
        if t != toks[-1] or vocab_size == 1:
            toks.append(t)
    return toks


def synth_generate(config: SynthConfig, out_dir: str | Path) -> Manifest:
    """Write a synthetic keypoint corpus plus ``manifest.tsv`` into ``out_dir``.

    Each token is a right-hand constellation held for ``frames_per_token``
    frames (no token follows itself).  The hand moves linearly between
    consecutive poses over ``transition_frames`` frames, and each video opens
    and closes with ``rest_frames`` frames of a lowered rest hand.  Body and
    left hand stay fixed; every coordinate gets Gaussian noise.  Frames are
    written in the Halpe-136 layout.
    """
    config.validate()
    out = Path(out_dir)
    (out / "keypoints").mkdir(parents=True, exist_ok=True)
    layout = load_layout("halpe136_default")
    right_slots = list(layout.source_indices[34:55])
    words = [f"w{i:02d}" for i in range(config.vocab_size)]
    protos = token_prototypes(config)
    base = _base_frame(derive_rng(config.seed, "base"))
    # rest pose: hand lowered beside the hip, fingers bunched
    rest = np.array([0.0, 120.0]) + derive_rng(config.seed, "rest").uniform(0.0, 0.25 * config.hand_size, size=(21, 2))
    rng = derive_rng(config.seed, "sentences")
    order = rng.permutation(config.videos)
    n_train, n_dev, _ = split_counts(config.videos)
    split_of = {}
    for rank, v in enumerate(order):
        split_of[int(v)] = "train" if rank < n_train else ("dev" if rank < n_train + n_dev else "test")
    rows = Manifest()
    width = len(str(config.videos - 1))
    for v in range(config.videos):
        length = int(rng.integers(config.min_len, config.max_len + 1))
        toks = _sentence(rng, length, config.vocab_size)
        hands = [rest] * config.rest_frames
        for j, tok in enumerate(toks):
            if j:
                prev, nxt = protos[toks[j - 1]], protos[tok]
                for step in range(1, config.transition_frames + 1):
                    w = step / (config.transition_frames + 1)
                    hands.append((1 - w) * prev + w * nxt)
            hands.extend([protos[tok]] * config.frames_per_token)
        hands.extend([rest] * config.rest_frames)
        frames = []
        for hand in hands:
            f = base.copy()
            f[right_slots] = _RIGHT_HAND_ANCHOR + hand
            if config.noise_sigma > 0:
                f = f + rng.normal(0.0, config.noise_sigma, size=f.shape)
            frames.append(f)
        vid = f"synth{v:0{width}d}"
        path = out / "keypoints" / f"{vid}.jsonl"
        write_pose_video(path, np.stack(frames))
        rows.append(ManifestRow(vid, path, " ".join(words[t] for t in toks), split_of[v]))
    write_manifest(out / "manifest.tsv", rows)
    return rows
