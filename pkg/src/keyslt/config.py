"""Pipeline configuration: a flat set of documented keys.

Files are either JSON objects or ``key = value`` lines (``#`` starts a
comment).  Unknown keys are rejected before any work starts.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigInvalid
from .normalization import SCHEMES
from .selection import parse_selector, probability_set
from .translator.model import ModelHyper
from .translator.train import TrainConfig


@dataclass
class PipelineConfig:
    # paths
    manifest: str = "manifest.tsv"
    layout: str = "halpe136_default"
    out_dir: str = "run"
    archive: str = ""  # default: <out_dir>/features.bin
    # preprocessing
    normalization: str = "customized"
    joint_hands: bool = False
    selector: str = "sass"
    l_p: int = 17
    n_rule: str = "mean"  # mean | median | <int>
    seed: int = 0
    workers: int = 1
    # model
    hidden_dim: int = 64
    embed_dim: int = 32
    input_proj_dim: int = 0
    dropout: float = 0.5
    max_target_len: int = 32
    # training
    lr: float = 0.001
    epochs: int = 100
    batch_size: int = 16
    clip_norm: float = 0.0
    reverse_frames: bool = False
    min_count: int = 1

    def validate(self) -> "PipelineConfig":
        if self.normalization not in SCHEMES:
            raise ConfigInvalid(f"normalization must be one of {', '.join(SCHEMES)}")
        try:
            parse_selector(self.selector)
            probability_set(self.l_p)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        if self.n_rule not in ("mean", "median"):
            try:
                if int(self.n_rule) < 2:
                    raise ValueError
            except ValueError:
                raise ConfigInvalid(f"n_rule must be mean, median or an integer >= 2, got {self.n_rule!r}") from None
        for key in ("hidden_dim", "embed_dim", "max_target_len", "batch_size", "min_count", "workers"):
            if getattr(self, key) < 1:
                raise ConfigInvalid(f"{key} must be >= 1")
        if self.epochs < 0:
            raise ConfigInvalid("epochs must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigInvalid("dropout must lie in [0, 1)")
        if not self.lr > 0:
            raise ConfigInvalid("lr must be > 0")
        return self

    @property
    def archive_path(self) -> Path:
        return Path(self.archive) if self.archive else Path(self.out_dir) / "features.bin"

    def model_hyper(self, vocab_size: int) -> ModelHyper:
        return ModelHyper(
            vocab_size=vocab_size,
            hidden_dim=self.hidden_dim,
            embed_dim=self.embed_dim,
            input_proj_dim=self.input_proj_dim,
            dropout_rate=self.dropout,
            max_target_len=self.max_target_len,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr,
            epochs=self.epochs,
            batch_size=self.batch_size,
            clip_norm=self.clip_norm,
            seed=self.seed,
            reverse_frames=self.reverse_frames,
        )

    def preprocess_dict(self) -> dict:
        keys = ("layout", "normalization", "joint_hands", "selector", "l_p", "n_rule", "seed")
        return {k: getattr(self, k) for k in keys}

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self, keys=None) -> str:
        d = self.to_dict() if keys is None else {k: getattr(self, k) for k in keys}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_FIELDS = {f.name: f for f in fields(PipelineConfig)}


def _coerce(key: str, value):
    kind = type(getattr(PipelineConfig(), key))
    if key == "n_rule":
        return str(value)
    if kind is bool:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigInvalid(f"{key}: expected a boolean, got {value!r}")
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{key}: expected {kind.__name__}, got {value!r}") from None


def config_from_mapping(values: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = asdict(base) if base is not None else {}
    for key, value in values.items():
        key = key.strip().replace("-", "_")
        if key == "N":
            key = "n_rule"
        if key not in _FIELDS:
            raise ConfigInvalid(f"unknown config key {key!r}")
        cfg[key] = _coerce(key, value)
    return PipelineConfig(**cfg).validate()


def parse_key_values(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{source}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".json":
            try:
                values = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid(f"{path}: invalid JSON: {exc}") from exc
            if not isinstance(values, dict):
                raise ConfigInvalid(f"{path}: expected a JSON object")
        else:
            values = parse_key_values(text, str(path))
        # relative paths inside a config file are relative to that file
        for key in ("manifest", "out_dir", "archive", "layout"):
            v = values.get(key)
            if v and not Path(str(v)).is_absolute() and not (key == "layout" and str(v) in ("halpe136_default", "identity55")):
                values[key] = str(path.parent / str(v))
    values.update(overrides or {})
    return config_from_mapping(values)


def write_resolved(cfg: PipelineConfig, out_dir: str | Path, name: str = "config.resolved.json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
