import hashlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from keyslt.corpus import (
    ManifestRow,
    SynthConfig,
    Vocab,
    build_vocab,
    load_manifest,
    point_set_distance,
    split_counts,
    synth_generate,
    token_prototypes,
    tokenize_whitespace,
    write_manifest,
)
from keyslt.errors import ConfigInvalid, MalformedManifest
from keyslt.keypoints import load_layout, load_pose_video
from keyslt.translator import EOS, UNK


@pytest.mark.parametrize("text, expected", [
    ("Der Wind weht", ["der", "wind", "weht"]),
    ("  ", []),
    ("a\tb\nc", ["a", "b", "c"]),
    ("x　Y z", ["x", "y", "z"]),
])
def test_tokenize(text, expected):
    assert tokenize_whitespace(text) == expected


def test_vocab_order_and_threshold():
    v = build_vocab(["a a b"])
    assert (v.id("a"), v.id("b")) == (4, 5)
    v2 = build_vocab(["a a b"], min_count=2)
    assert v2.id("a") == 4 and v2.id("b") == UNK
    tie = build_vocab(["c b a", "b c"])
    assert tie.to_list()[4:] == ["b", "c", "a"]


@given(st.lists(st.sampled_from(["x", "y", "zz", "w"]), max_size=8))
def test_encode_decode_roundtrip(tokens):
    v = build_vocab([["x", "y", "zz", "w"]])
    ids = v.encode(tokens)
    assert ids[-1] == EOS
    assert v.decode(ids) == tokens


def test_decode_skips_pad_and_stops_at_eos():
    v = Vocab(["a", "b"])
    assert v.decode([1, 4, 0, 5, 2, 4]) == ["a", "b"]
    assert Vocab.from_list(v.to_list()).to_list() == v.to_list()
    with pytest.raises(ValueError):
        Vocab.from_list(["a", "b"])


def _touch(tmp_path, name):
    p = tmp_path / name
    p.write_text("")
    return p


def test_manifest_valid(tmp_path):
    for n in ("a.jsonl", "b.jsonl", "c.jsonl"):
        _touch(tmp_path, n)
    m = tmp_path / "m.tsv"
    m.write_text("video_id\tkeypoint_path\tsentence\tsplit\n"
                 "v1\ta.jsonl\thello there\ttrain\n"
                 "v2\tb.jsonl\tgood bye\tdev\n"
                 "v3\tc.jsonl\tok\ttest\n")
    rows = load_manifest(m)
    assert len(rows) == 3
    assert rows[0].keypoint_path == tmp_path / "a.jsonl"
    assert [r.video_id for r in rows.split("dev")] == ["v2"]


@pytest.mark.parametrize("body, row, col", [
    ("v1\ta.jsonl\n", 1, 3),
    ("v1\ta.jsonl\thi\ttrain\nv1\ta.jsonl\tho\ttrain\n", 2, 1),
    ("v1\ta.jsonl\thi\tvalidation\n", 1, 4),
    ("\ta.jsonl\thi\ttrain\n", 1, 1),
])
def test_manifest_errors(tmp_path, body, row, col):
    _touch(tmp_path, "a.jsonl")
    m = tmp_path / "m.tsv"
    m.write_text(body)
    with pytest.raises(MalformedManifest) as exc:
        load_manifest(m)
    assert exc.value.row == row and exc.value.column == col


def test_manifest_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / "nope.tsv")
    m = tmp_path / "m.tsv"
    m.write_text("v1\tmissing.jsonl\thi\ttrain\n")
    with pytest.raises(FileNotFoundError, match="missing.jsonl"):
        load_manifest(m)
    assert len(load_manifest(m, check_files=False)) == 1


def test_manifest_write_roundtrip(tmp_path):
    _touch(tmp_path, "a.jsonl")
    rows = [ManifestRow("v1", tmp_path / "a.jsonl", "a b", "train")]
    write_manifest(tmp_path / "m.tsv", rows)
    assert list(load_manifest(tmp_path / "m.tsv")) == rows


@pytest.mark.parametrize("n", [10, 200, 37, 1])
def test_split_counts(n):
    tr, dv, te = split_counts(n)
    assert tr + dv + te == n and min(tr, dv, te) >= 0
    if n == 200:
        assert (tr, dv, te) == (160, 20, 20)


@pytest.fixture(scope="module")
def synth_default(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    return synth_generate(SynthConfig(), out), out


def test_synth_counts_and_splits(synth_default):
    rows, out = synth_default
    assert len(rows) == 200
    assert len(list((out / "keypoints").glob("*.jsonl"))) == 200
    counts = {s: len(rows.split(s)) for s in ("train", "dev", "test")}
    assert counts == {"train": 160, "dev": 20, "test": 20}
    assert len({r.video_id for r in rows}) == 200
    reread = load_manifest(out / "manifest.tsv")
    assert [r.video_id for r in reread] == [r.video_id for r in rows]
    lengths = {len(r.sentence.split()) for r in rows}
    assert lengths == {2, 3, 4, 5}
    for r in rows:
        toks = r.sentence.split()
        assert all(a != b for a, b in zip(toks, toks[1:]))


def test_synth_videos_pass_ingestion(synth_default):
    rows, _ = synth_default
    layout = load_layout("halpe136_default")
    lengths = set()
    for r in rows:
        v = load_pose_video(r.keypoint_path, layout, r.video_id)
        assert np.isfinite(v.frames).all()
        lengths.add(v.T)
    assert len(lengths) > 3


def test_synth_prototypes_separated():
    cfg = SynthConfig()
    protos = token_prototypes(cfg)
    assert protos.shape == (20, 21, 2)
    for i in range(20):
        for j in range(i + 1, 20):
            assert point_set_distance(protos[i], protos[j]) > 10 * cfg.noise_sigma


def _digest(folder: Path) -> dict:
    return {p.relative_to(folder).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(folder.rglob("*")) if p.is_file()}


def test_synth_deterministic_without_noise(tmp_path):
    cfg = SynthConfig(videos=12, noise_sigma=0.0, seed=3)
    synth_generate(cfg, tmp_path / "a")
    synth_generate(cfg, tmp_path / "b")
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")


def test_synth_seed_changes_output(tmp_path):
    synth_generate(SynthConfig(videos=5, seed=1), tmp_path / "a")
    synth_generate(SynthConfig(videos=5, seed=2), tmp_path / "b")
    assert _digest(tmp_path / "a") != _digest(tmp_path / "b")


@pytest.mark.parametrize("kw", [
    dict(vocab_size=0), dict(min_len=4, max_len=2), dict(noise_sigma=-1.0), dict(hand_size=0.0),
    dict(rest_frames=-1),
])
def test_synth_config_invalid(tmp_path, kw):
    with pytest.raises(ConfigInvalid):
        synth_generate(SynthConfig(**kw), tmp_path)
