"""Bidirectional GRU encoder, additive attention and GRU decoder in numpy.

Parameters live in a flat ``dict[str, np.ndarray]``.  Forward passes keep the
intermediates needed by :func:`loss_and_grads`, which backpropagates through
time by hand.  Everything runs in float64.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import EmptyBatch, SequenceTooLong, ShapeMismatch
from ..keypoints import FEATURE_DIM

PAD, SOS, EOS, UNK = 0, 1, 2, 3

_GATES = ("Wz", "Wr", "Wh", "bz", "br", "bh")


@dataclass
class ModelHyper:
    vocab_size: int
    input_dim: int = FEATURE_DIM
    hidden_dim: int = 64
    embed_dim: int = 32
    attention_dim: int = 0  # 0 -> hidden_dim
    input_proj_dim: int = 0  # 0 -> feed features directly
    dropout_rate: float = 0.5
    max_target_len: int = 32

    def __post_init__(self):
        if self.attention_dim == 0:
            self.attention_dim = self.hidden_dim
        for f in ("vocab_size", "input_dim", "hidden_dim", "embed_dim", "attention_dim", "max_target_len"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.input_proj_dim < 0:
            raise ValueError("input_proj_dim must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def encoder_input_dim(self) -> int:
        return self.input_proj_dim or self.input_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelHyper":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def param_shapes(hyper: ModelHyper) -> dict[str, tuple[int, ...]]:
    H, E, A, V = hyper.hidden_dim, hyper.embed_dim, hyper.attention_dim, hyper.vocab_size
    Din = hyper.encoder_input_dim
    shapes: dict[str, tuple[int, ...]] = {}
    if hyper.input_proj_dim:
        shapes["in_proj.W"] = (hyper.input_proj_dim, hyper.input_dim)
        shapes["in_proj.b"] = (hyper.input_proj_dim,)

    def cell(prefix, n_in):
        for g in ("Wz", "Wr", "Wh"):
            shapes[f"{prefix}.{g}"] = (H, n_in + H)
        for g in ("bz", "br", "bh"):
            shapes[f"{prefix}.{g}"] = (H,)

    cell("enc_f", Din)
    cell("enc_b", Din)
    shapes["init.W"] = (H, H)
    shapes["init.b"] = (H,)
    shapes["att.Ws"] = (A, H)
    shapes["att.Wh"] = (A, 2 * H)
    shapes["att.v"] = (A,)
    shapes["embed"] = (V, E)
    cell("dec", E + 2 * H)
    shapes["out.W"] = (V, 3 * H)
    shapes["out.b"] = (V,)
    return shapes


def _fan_in(name: str, shapes) -> int:
    prefix, _, leaf = name.rpartition(".")
    if not prefix:
        return shapes[name][-1]
    if leaf.startswith("b"):
        sibling = f"{prefix}.W{leaf[1:]}" if f"{prefix}.W{leaf[1:]}" in shapes else f"{prefix}.W"
        return shapes[sibling][1]
    if leaf == "v":
        return shapes[name][0]
    return shapes[name][1]


def init_params(hyper: ModelHyper, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every tensor."""
    shapes = param_shapes(hyper)
    params = {}
    for name, shape in shapes.items():
        bound = 1.0 / np.sqrt(_fan_in(name, shapes))
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def zero_params(hyper: ModelHyper) -> dict[str, np.ndarray]:
    return {name: np.zeros(shape) for name, shape in param_shapes(hyper).items()}


def _cell(params, prefix):
    return {g: params[f"{prefix}.{g}"] for g in _GATES}


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


# -- GRU cell ----------------------------------------------------------------

def _gru_forward(x, h, cell):
    n_in = x.shape[-1]
    if cell["Wz"].shape[1] != n_in + h.shape[-1]:
        raise ShapeMismatch(f"cell expects input {cell['Wz'].shape[1] - h.shape[-1]}, got {n_in}")
    xh = np.concatenate([x, h], axis=-1)
    z = sigmoid(xh @ cell["Wz"].T + cell["bz"])
    r = sigmoid(xh @ cell["Wr"].T + cell["br"])
    xrh = np.concatenate([x, r * h], axis=-1)
    hc = np.tanh(xrh @ cell["Wh"].T + cell["bh"])
    h_new = (1.0 - z) * h + z * hc
    return h_new, (xh, xrh, z, r, hc, h, n_in)


def _gru_backward(dh_new, cache, cell, grads, prefix):
    """Returns (dx, dh_prev); accumulates weight gradients into ``grads``."""
    xh, xrh, z, r, hc, h, n_in = cache
    dz = dh_new * (hc - h)
    dhc = dh_new * z
    dh = dh_new * (1.0 - z)
    dahc = dhc * (1.0 - hc * hc)
    grads[f"{prefix}.Wh"] += dahc.T @ xrh
    grads[f"{prefix}.bh"] += dahc.sum(axis=0)
    dxrh = dahc @ cell["Wh"]
    dx = dxrh[:, :n_in].copy()
    drh = dxrh[:, n_in:]
    dr = drh * h
    dh += drh * r
    daz = dz * z * (1.0 - z)
    dar = dr * r * (1.0 - r)
    grads[f"{prefix}.Wz"] += daz.T @ xh
    grads[f"{prefix}.bz"] += daz.sum(axis=0)
    grads[f"{prefix}.Wr"] += dar.T @ xh
    grads[f"{prefix}.br"] += dar.sum(axis=0)
    dxh = daz @ cell["Wz"] + dar @ cell["Wr"]
    dx += dxh[:, :n_in]
    dh += dxh[:, n_in:]
    return dx, dh


def gru_cell_forward(x, h_prev, cell) -> np.ndarray:
    """One gated recurrent step.  ``cell`` maps Wz, Wr, Wh, bz, br, bh to arrays.

    Accepts a single vector or a batch of row vectors.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    single = x.ndim == 1
    h, _ = _gru_forward(np.atleast_2d(x), np.atleast_2d(h_prev), cell)
    return h[0] if single else h


# -- encoder -----------------------------------------------------------------

def _check_features(X, hyper):
    if X.ndim != 3 or X.shape[2] != hyper.input_dim or X.shape[1] < 1:
        raise ShapeMismatch(f"features must have shape (B, N>=1, {hyper.input_dim}), got {X.shape}")


def _encode(X, params, hyper, drop_mask):
    _check_features(X, hyper)
    B, N, _ = X.shape
    H = hyper.hidden_dim
    Xe = X @ params["in_proj.W"].T + params["in_proj.b"] if hyper.input_proj_dim else X
    cf, cb = _cell(params, "enc_f"), _cell(params, "enc_b")
    Hs = np.empty((B, N, 2 * H))
    h = np.zeros((B, H))
    f_caches = []
    for t in range(N):
        h, c = _gru_forward(Xe[:, t], h, cf)
        Hs[:, t, :H] = h
        f_caches.append(c)
    h = np.zeros((B, H))
    b_caches = [None] * N
    for t in reversed(range(N)):
        h, c = _gru_forward(Xe[:, t], h, cb)
        Hs[:, t, H:] = h
        b_caches[t] = c
    Hd = Hs * drop_mask if drop_mask is not None else Hs
    return Hs, Hd, (X, Xe, f_caches, b_caches)


def dropout_mask(shape, rate, rng) -> np.ndarray | None:
    if rate <= 0.0 or rng is None:
        return None
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def encode(features, params, hyper: ModelHyper, training: bool = False, rng=None) -> np.ndarray:
    """Encoder states ``(N, 2H)`` for one video, or ``(B, N, 2H)`` for a batch."""
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 2
    X = X[None] if single else X
    mask = dropout_mask((X.shape[0], X.shape[1], 2 * hyper.hidden_dim), hyper.dropout_rate, rng) if training else None
    _, Hd, _ = _encode(X, params, hyper, mask)
    return Hd[0] if single else Hd


# -- attention / decoder -----------------------------------------------------

def _attend(s, Hd, Hproj, params):
    e = np.tanh(Hproj + (s @ params["att.Ws"].T)[:, None, :])
    scores = e @ params["att.v"]
    a = softmax(scores, axis=1)
    ctx = (a[:, None, :] @ Hd)[:, 0]
    return a, ctx, (s, e, a)


def _attend_backward(dctx, cache, Hd, params, grads, dHd, dHproj):
    s, e, a = cache
    da = (Hd @ dctx[:, :, None])[:, :, 0]
    dHd += a[:, :, None] * dctx[:, None, :]
    dscores = a * (da - (a * da).sum(axis=1, keepdims=True))
    grads["att.v"] += np.einsum("bn,bna->a", dscores, e)
    dpre = dscores[:, :, None] * params["att.v"] * (1.0 - e * e)
    dHproj += dpre
    dsp = dpre.sum(axis=1)
    grads["att.Ws"] += dsp.T @ s
    return dsp @ params["att.Ws"]


def attention_weights(s_prev, H, params) -> np.ndarray:
    """Softmax over encoder positions of ``v . tanh(Ws s + Wh h_k)``."""
    s_prev = np.atleast_2d(np.asarray(s_prev, dtype=np.float64))
    H = np.asarray(H, dtype=np.float64)
    single = H.ndim == 2
    Hb = H[None] if single else H
    if Hb.shape[2] != params["att.Wh"].shape[1] or s_prev.shape[1] != params["att.Ws"].shape[1]:
        raise ShapeMismatch("attention input dimensions do not match parameters")
    a, _, _ = _attend(s_prev, Hb, Hb @ params["att.Wh"].T, params)
    return a[0] if single else a


def context_vector(a, H) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if a.shape[-1] != H.shape[-2]:
        raise ShapeMismatch(f"{a.shape[-1]} weights for {H.shape[-2]} encoder states")
    return (a[..., None, :] @ H)[..., 0, :]


def initial_state(Hs, params) -> np.ndarray:
    """Decoder s_0 from the backward encoder's final state (position 0)."""
    H = params["init.W"].shape[0]
    return np.tanh(Hs[:, 0, H:] @ params["init.W"].T + params["init.b"])


def decoder_step(prev_token_embed, s_prev, ctx, params):
    """One decoder step; returns ``(s_new, logits)``."""
    x = np.concatenate([np.atleast_2d(prev_token_embed), np.atleast_2d(ctx)], axis=-1)
    s_new, _ = _gru_forward(x, np.atleast_2d(s_prev), _cell(params, "dec"))
    o = np.concatenate([s_new, np.atleast_2d(ctx)], axis=-1)
    if o.shape[1] != params["out.W"].shape[1]:
        raise ShapeMismatch("decoder readout dimension does not match out.W")
    logits = o @ params["out.W"].T + params["out.b"]
    if np.ndim(s_prev) == 1:
        return s_new[0], logits[0]
    return s_new, logits


# -- loss and gradients ------------------------------------------------------

@dataclass
class Batch:
    features: np.ndarray  # (B, N, D)
    y_in: np.ndarray  # (B, L) decoder inputs, SOS-prefixed
    y_out: np.ndarray  # (B, L) targets
    mask: np.ndarray  # (B, L) 1.0 on real tokens


def make_batch(examples, hyper: ModelHyper) -> Batch:
    """``examples`` is a sequence of ``(features (N, D), token ids ending in EOS)``."""
    if len(examples) == 0:
        raise EmptyBatch("empty batch")
    feats = np.stack([np.asarray(f, dtype=np.float64) for f, _ in examples])
    L = max(len(t) for _, t in examples)
    B = len(examples)
    y_in = np.full((B, L), PAD, dtype=np.int64)
    y_out = np.full((B, L), PAD, dtype=np.int64)
    mask = np.zeros((B, L))
    for b, (_, toks) in enumerate(examples):
        toks = [int(t) for t in toks]
        if not toks or toks[-1] != EOS:
            raise SequenceTooLong("target sequence must end with EOS")
        if len(toks) > hyper.max_target_len:
            raise SequenceTooLong(f"target of length {len(toks)} exceeds max_target_len={hyper.max_target_len}")
        n = len(toks)
        y_out[b, :n] = toks
        y_in[b, 0] = SOS
        y_in[b, 1:n] = toks[:-1]
        mask[b, :n] = 1.0
    return Batch(feats, y_in, y_out, mask)


def _as_batch(batch, hyper):
    return batch if isinstance(batch, Batch) else make_batch(batch, hyper)


def _forward(batch: Batch, params, hyper, training, rng):
    X = batch.features
    H = hyper.hidden_dim
    drop = dropout_mask((X.shape[0], X.shape[1], 2 * H), hyper.dropout_rate, rng) if training else None
    Hs, Hd, enc_cache = _encode(X, params, hyper, drop)
    Hproj = Hd @ params["att.Wh"].T
    s = initial_state(Hs, params)
    s0 = s
    dec = _cell(params, "dec")
    count = batch.mask.sum()
    total = 0.0
    steps = []
    for i in range(batch.y_in.shape[1]):
        _, ctx, acache = _attend(s, Hd, Hproj, params)
        emb = params["embed"][batch.y_in[:, i]]
        s_new, gcache = _gru_forward(np.concatenate([emb, ctx], axis=1), s, dec)
        o = np.concatenate([s_new, ctx], axis=1)
        logits = o @ params["out.W"].T + params["out.b"]
        logp = log_softmax(logits)
        m = batch.mask[:, i]
        total -= float((logp[np.arange(len(m)), batch.y_out[:, i]] * m).sum())
        steps.append((acache, gcache, o, logp))
        s = s_new
    loss = total / count
    return loss, (Hs, Hd, drop, s0, enc_cache, steps, count)


def forward_loss(batch, params, hyper: ModelHyper, rng=None, training: bool = False) -> float:
    """Token-averaged cross-entropy under teacher forcing; padding is masked."""
    loss, _ = _forward(_as_batch(batch, hyper), params, hyper, training, rng)
    return loss


def loss_and_grads(batch, params, hyper: ModelHyper, rng=None, training: bool = False):
    """Forward pass plus gradients of :func:`forward_loss` for every parameter."""
    batch = _as_batch(batch, hyper)
    loss, (Hs, Hd, drop, s0, enc_cache, steps, count) = _forward(batch, params, hyper, training, rng)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    H, E = hyper.hidden_dim, hyper.embed_dim
    B = Hd.shape[0]
    rows = np.arange(B)
    dec = _cell(params, "dec")
    dHd = np.zeros_like(Hd)
    dHproj = np.zeros(Hd.shape[:2] + (hyper.attention_dim,))
    ds_next = np.zeros((B, H))
    for i in reversed(range(len(steps))):
        acache, gcache, o, logp = steps[i]
        dlogits = np.exp(logp)
        dlogits[rows, batch.y_out[:, i]] -= 1.0
        dlogits *= batch.mask[:, i, None] / count
        grads["out.W"] += dlogits.T @ o
        grads["out.b"] += dlogits.sum(axis=0)
        do = dlogits @ params["out.W"]
        ds = ds_next + do[:, :H]
        dctx = do[:, H:].copy()
        dx, ds_prev = _gru_backward(ds, gcache, dec, grads, "dec")
        np.add.at(grads["embed"], batch.y_in[:, i], dx[:, :E])
        dctx += dx[:, E:]
        ds_prev += _attend_backward(dctx, acache, Hd, params, grads, dHd, dHproj)
        ds_next = ds_prev
    grads["att.Wh"] += np.einsum("bna,bnd->ad", dHproj, Hd)
    dHd += dHproj @ params["att.Wh"]
    dHs = dHd * drop if drop is not None else dHd
    dpre = ds_next * (1.0 - s0 * s0)
    grads["init.W"] += dpre.T @ Hs[:, 0, H:]
    grads["init.b"] += dpre.sum(axis=0)
    dHs[:, 0, H:] += dpre @ params["init.W"]

    X, Xe, f_caches, b_caches = enc_cache
    N = X.shape[1]
    dXe = np.zeros_like(Xe)
    cf, cb = _cell(params, "enc_f"), _cell(params, "enc_b")
    dh = np.zeros((B, H))
    for t in reversed(range(N)):
        dh = dh + dHs[:, t, :H]
        dx, dh = _gru_backward(dh, f_caches[t], cf, grads, "enc_f")
        dXe[:, t] += dx
    dh = np.zeros((B, H))
    for t in range(N):
        dh = dh + dHs[:, t, H:]
        dx, dh = _gru_backward(dh, b_caches[t], cb, grads, "enc_b")
        dXe[:, t] += dx
    if hyper.input_proj_dim:
        grads["in_proj.W"] += np.einsum("bnp,bnd->pd", dXe, X)
        grads["in_proj.b"] += dXe.sum(axis=(0, 1))
    return loss, grads


backward = loss_and_grads


# -- inference ---------------------------------------------------------------

def greedy_decode(features, params, hyper: ModelHyper) -> list[int] | list[list[int]]:
    """Argmax decoding from SOS until EOS or ``max_target_len`` tokens.

    Ties go to the lowest token id.  EOS is not included in the output.
    """
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 2
    X = X[None] if single else X
    _, Hd, _ = _encode(X, params, hyper, None)
    Hproj = Hd @ params["att.Wh"].T
    s = initial_state(Hd, params)
    dec = _cell(params, "dec")
    B = X.shape[0]
    prev = np.full(B, SOS, dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    out: list[list[int]] = [[] for _ in range(B)]
    for _ in range(hyper.max_target_len):
        _, ctx, _ = _attend(s, Hd, Hproj, params)
        s, _ = _gru_forward(np.concatenate([params["embed"][prev], ctx], axis=1), s, dec)
        logits = np.concatenate([s, ctx], axis=1) @ params["out.W"].T + params["out.b"]
        prev = np.argmax(logits, axis=1)
        for b in range(B):
            if done[b]:
                continue
            if prev[b] == EOS:
                done[b] = True
            else:
                out[b].append(int(prev[b]))
        if done.all():
            break
    return out[0] if single else out


def reverse_frames(features) -> np.ndarray:
    """Reverse the frame axis of ``(N, D)`` or ``(B, N, D)`` features."""
    X = np.asarray(features)
    return X[::-1].copy() if X.ndim == 2 else X[:, ::-1].copy()
