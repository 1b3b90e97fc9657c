"""End-to-end steps shared by the CLI: preprocess, train, translate, evaluate."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .archive import read_archive, write_archive
from .config import PipelineConfig, write_resolved
from .corpus import Manifest, Vocab, build_vocab, load_manifest, tokenize_whitespace
from .errors import EmptyCorpus, InvariantViolation, KeysltError
from .keypoints import KeypointVideo, corpus_stats, flatten_video, load_layout, load_pose_video
from .metrics import EvalReport, evaluate_corpus
from .normalization import NormalizationScheme, normalize_video
from .selection import derive_rng, select_indices
from .translator import ModelHyper, greedy_decode, load_checkpoint, reverse_frames, save_checkpoint, train

log = logging.getLogger(__name__)


def featurize(video: KeypointVideo, N: int, normalization: str = "customized", selector: str = "sass",
              l_p: int = 17, seed: int = 0, joint_hands: bool = False) -> np.ndarray:
    """Normalize, fix to N frames and flatten: ``(N, 110)``."""
    scheme = NormalizationScheme(normalization, joint_hands=joint_hands)
    normed = normalize_video(video.frames, scheme)
    idx = select_indices(video.T, N, selector, l_p, derive_rng(seed, video.id))
    return flatten_video(normed[idx])


def resolve_N(n_rule: str, lengths: list[int]) -> int:
    if n_rule in ("mean", "median"):
        return corpus_stats(lengths, n_rule).chosen_N
    return int(n_rule)


def _featurize_job(args):
    video, N, cfg = args
    try:
        return featurize(video, N, cfg["normalization"], cfg["selector"], cfg["l_p"], cfg["seed"], cfg["joint_hands"])
    except KeysltError as exc:
        raise KeysltError(f"video {video.id}: {exc}") from exc


@dataclass
class PreprocessResult:
    header: dict
    features: np.ndarray
    checksum: str
    path: Path


def preprocess(cfg: PipelineConfig) -> PreprocessResult:
    manifest = load_manifest(cfg.manifest)
    if not manifest:
        raise EmptyCorpus(f"manifest {cfg.manifest} has no rows")
    layout = load_layout(cfg.layout)
    videos = []
    for row in manifest:
        try:
            videos.append(load_pose_video(row.keypoint_path, layout, row.video_id))
        except KeysltError as exc:
            raise KeysltError(f"video {row.video_id}: {exc}") from exc
    train_lengths = [v.T for v, r in zip(videos, manifest) if r.split == "train"] or [v.T for v in videos]
    N = resolve_N(cfg.n_rule, train_lengths)
    pre = cfg.preprocess_dict()
    jobs = [(v, N, pre) for v in videos]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            feats = list(pool.map(_featurize_job, jobs, chunksize=8))
    else:
        feats = [_featurize_job(j) for j in jobs]
    features = np.stack(feats)
    lengths = [v.T for v in videos]
    header = {
        "N": N,
        "config_hash": cfg.digest(list(pre)),
        "preprocess": pre,
        "video_ids": [r.video_id for r in manifest],
        "splits": [r.split for r in manifest],
        "sentences": [r.sentence for r in manifest],
        "frame_counts": lengths,
        "augmented": sum(t < N for t in lengths),
        "sampled": sum(t > N for t in lengths),
    }
    path = cfg.archive_path
    path.parent.mkdir(parents=True, exist_ok=True)
    checksum = write_archive(path, features, header)
    write_resolved(cfg, cfg.out_dir)
    log.info("wrote %s shape=%s N=%d augmented=%d sampled=%d", path, features.shape, N,
             header["augmented"], header["sampled"])
    return PreprocessResult(header, features, checksum, path)


def _split_examples(head, features, vocab: Vocab, split: str):
    rows = [i for i, s in enumerate(head["splits"]) if s == split]
    return [(features[i], vocab.encode(tokenize_whitespace(head["sentences"][i]))) for i in rows], rows


@dataclass
class TrainResult:
    checkpoint: Path
    history: list[dict]


def run_train(cfg: PipelineConfig) -> TrainResult:
    head, features = read_archive(cfg.archive_path)
    train_rows = [i for i, s in enumerate(head["splits"]) if s == "train"]
    if not train_rows:
        raise EmptyCorpus("feature archive has no train split")
    vocab = build_vocab((head["sentences"][i] for i in train_rows), cfg.min_count)
    hyper = cfg.model_hyper(len(vocab))
    dataset, _ = _split_examples(head, features, vocab, "train")
    params, history = train(dataset, hyper, cfg.train_config())
    if any(not math.isfinite(h["loss"]) for h in history):
        raise InvariantViolation("training produced a non-finite loss")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.json"
    extra = {"preprocess": dict(head["preprocess"], N=head["N"]), "reverse_frames": cfg.reverse_frames}
    save_checkpoint(ckpt, params, hyper, vocab.to_list(), extra)
    with (out / "loss_log.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,loss\n")
        for h in history:
            fh.write(f"{h['epoch']},{float(h['loss'])!r}\n")
    write_resolved(cfg, out)
    return TrainResult(ckpt, history)


@dataclass
class Translation:
    video_id: str
    hypothesis: list[str]
    reference: str = ""


class Translator:
    """A loaded checkpoint plus the preprocessing it was trained with."""

    def __init__(self, checkpoint: str | Path):
        self.params, self.hyper, itos, doc = load_checkpoint(checkpoint)
        self.vocab = Vocab.from_list(itos)
        self.pre = doc.get("preprocess", {})
        self.reverse = bool(doc.get("reverse_frames", False))

    def decode_features(self, features: np.ndarray) -> list[list[str]]:
        X = np.asarray(features, dtype=np.float64)
        if self.reverse:
            X = reverse_frames(X)
        ids = greedy_decode(X, self.params, self.hyper)
        return [self.vocab.decode(seq) for seq in ids]

    def featurize(self, video: KeypointVideo) -> np.ndarray:
        p = self.pre
        return featurize(video, int(p["N"]), p.get("normalization", "customized"), p.get("selector", "sass"),
                         int(p.get("l_p", 17)), int(p.get("seed", 0)), bool(p.get("joint_hands", False)))

    def translate_file(self, path: str | Path, layout=None) -> Translation:
        layout = load_layout(layout if layout is not None else self.pre.get("layout"))
        video = load_pose_video(path, layout)
        return Translation(video.id, self.decode_features(self.featurize(video)[None])[0])

    def translate_manifest(self, manifest: Manifest, split: str | None = None) -> list[Translation]:
        layout = load_layout(self.pre.get("layout"))
        rows = [r for r in manifest if split is None or r.split == split]
        feats = [self.featurize(load_pose_video(r.keypoint_path, layout, r.video_id)) for r in rows]
        if not feats:
            return []
        hyps = self.decode_features(np.stack(feats))
        return [Translation(r.video_id, h, r.sentence) for r, h in zip(rows, hyps)]

    def translate_archive(self, path: str | Path, split: str | None = "test") -> list[Translation]:
        head, features = read_archive(path)
        rows = [i for i, s in enumerate(head["splits"]) if split is None or s == split]
        if not rows:
            return []
        hyps = self.decode_features(features[rows])
        return [Translation(head["video_ids"][i], h, head["sentences"][i]) for i, h in zip(rows, hyps)]


def write_translations(path: str | Path, items: list[Translation]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("video_id\thypothesis\treference\n")
        for t in items:
            fh.write(f"{t.video_id}\t{' '.join(t.hypothesis)}\t{t.reference}\n")


def read_translations(path: str | Path) -> list[Translation]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"hypothesis file not found: {path}")
    out = []
    with path.open(encoding="utf-8", newline="") as fh:
        for rowno, cols in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), start=1):
            if rowno == 1 and cols[:1] == ["video_id"]:
                continue
            if not cols:
                continue
            if len(cols) != 3:
                raise KeysltError(f"{path}: row {rowno}: expected 3 tab-separated columns, found {len(cols)}")
            out.append(Translation(cols[0], tokenize_whitespace(cols[1]), cols[2]))
    return out


def evaluate_translations(items: list[Translation], smooth: float = 0.0) -> EvalReport:
    return evaluate_corpus(
        [t.hypothesis for t in items],
        [tokenize_whitespace(t.reference) for t in items],
        [t.video_id for t in items],
        smooth=smooth,
    )
