"""Mini-batch training loop."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ConfigInvalid
from ..selection import derive_rng
from .model import ModelHyper, init_params, loss_and_grads, make_batch, reverse_frames
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    clip_norm: float = 0.0  # 0 disables global-norm clipping
    seed: int = 0
    teacher_forcing: bool = True
    reverse_frames: bool = False

    def validate(self):
        if not self.learning_rate > 0:
            raise ConfigInvalid("learning_rate must be > 0")
        if self.epochs < 0:
            raise ConfigInvalid("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigInvalid("batch_size must be >= 1")
        if not self.teacher_forcing:
            raise ConfigInvalid("training always uses teacher forcing")
        if self.clip_norm < 0:
            raise ConfigInvalid("clip_norm must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _clip(grads, max_norm):
    norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def train(dataset, hyper: ModelHyper, config: TrainConfig, params=None, on_epoch=None):
    """Train on ``dataset``, a list of ``(features (N, D), token ids ending in EOS)``.

    Returns ``(params, history)`` where ``history`` holds one dict per epoch
    with the token-weighted mean training loss.
    """
    config.validate()
    if params is None:
        params = init_params(hyper, derive_rng(config.seed, "init"))
    history: list[dict] = []
    if config.epochs == 0:
        return params, history
    if not dataset:
        raise ConfigInvalid("training set is empty")
    if config.reverse_frames:
        dataset = [(reverse_frames(f), t) for f, t in dataset]
    rng = derive_rng(config.seed, "train")
    state = AdamState()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(dataset))
        total, tokens = 0.0, 0.0
        for start in range(0, len(order), config.batch_size):
            batch = make_batch([dataset[i] for i in order[start:start + config.batch_size]], hyper)
            loss, grads = loss_and_grads(batch, params, hyper, rng=rng, training=True)
            if config.clip_norm:
                _clip(grads, config.clip_norm)
            adam_step(params, grads, state, config.learning_rate, config.beta1, config.beta2, config.eps_adam)
            n = float(batch.mask.sum())
            total += loss * n
            tokens += n
        row = {"epoch": epoch, "loss": float(total / tokens)}
        history.append(row)
        log.info("epoch %d loss %.6f", epoch, row["loss"])
        if on_epoch is not None:
            on_epoch(row, params)
    return params, history
