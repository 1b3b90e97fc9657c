"""Acceptance criteria, one test per criterion.

Each test appends a ``PASS``/``FAIL`` line to the summary printed at the end of
the pytest run (see ``conftest.py``).  Time budgets are part of the criteria.
"""
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from keyslt.config import load_config
from keyslt.corpus import SynthConfig, synth_generate
from keyslt.metrics import bleu4, bleu_stats, lcs_length, meteor_exact, rouge_l
from keyslt.normalization import normalize_customized
from keyslt.pipeline import Translator, evaluate_translations, preprocess, run_train
from keyslt.selection import (
    binomial_pmf_row,
    derive_rng,
    kurtosis,
    median_reorder,
    mixture_distribution,
    probability_set,
    selection_distribution,
    skip_plan,
    skip_sample_indices,
)
from keyslt.translator import (
    EOS,
    ModelHyper,
    forward_loss,
    init_params,
    loss_and_grads,
    make_batch,
    zero_params,
)
from test_metrics import brute_bleu, brute_clipped, brute_lcs, random_pairs
from test_translator import numeric_grad, rel_error


@contextmanager
def criterion(label, budget=None):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None and elapsed > budget:
            pytest.fail(f"took {elapsed:.2f}s, budget {budget}s")
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        reason = str(exc).splitlines()[0][:120] if str(exc) else type(exc).__name__
        line = f"FAIL  {label}  ({elapsed:.2f}s)  {reason}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"PASS  {label}  ({elapsed:.2f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_published_benchmark_scores_not_reproducible():
    # Informational: published benchmark numbers need the full datasets and
    # GPU-scale training.  The property and oracle criteria below stand in.
    line = ("N/A   published benchmark scores: not reproducible at desk scale, "
            "substituted by the criteria below")
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_distribution_correctness():
    with criterion("distribution correctness (exact pmf oracle, sums to 1)", budget=5.0):
        pset = probability_set(17)
        assert pset.n == 8 and pset.l_p == 17
        worst = 0.0
        for T in range(1, 21):
            n = T - 1
            for p in pset.values:
                exact = [math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(T)]
                got = binomial_pmf_row(T, float(p))
                for g, e in zip(got, exact):
                    worst = max(worst, abs(Fraction(g) - e) / e)
        assert worst < 1e-12, worst
        for T in list(range(1, 60)) + [100, 250, 1000]:
            for l_p in range(1, 19, 2):
                mix = mixture_distribution(T, l_p)
                assert abs(mix.sum() - 1.0) < 1e-9
                assert abs(selection_distribution(T, l_p).sum() - 1.0) < 1e-9
            for p in pset.values:
                assert abs(binomial_pmf_row(T, float(p)).sum() - 1.0) < 1e-9


def test_kurtosis_increases_with_lp_literal():
    # Stated on the plain mixture.  Under the fourth-standardized-moment
    # definition this sequence decreases, so the check is expected to fail.
    with criterion("kurtosis non-decreasing in l_p (plain mixture, T=100)", budget=1.0):
        ks = [kurtosis(mixture_distribution(100, l_p)) for l_p in range(3, 19, 2)]
        assert all(b >= a for a, b in zip(ks, ks[1:])), f"kurtosis by l_p: {[round(k, 4) for k in ks]}"
        assert ks[-1] - ks[0] >= 1e-6


def test_kurtosis_increases_with_lp_reordered():
    with criterion("kurtosis non-decreasing in l_p (median-reordered, T=100)", budget=1.0):
        ks = [kurtosis(median_reorder(mixture_distribution(100, l_p))) for l_p in range(3, 19, 2)]
        assert all(b >= a for a, b in zip(ks, ks[1:])), ks
        assert ks[-1] - ks[0] >= 1e-6


def test_skip_sampling_invariants():
    with criterion("skip-sampling invariants (1000 triples, worked example)", budget=5.0):
        gen = np.random.default_rng(1000)
        for _ in range(1000):
            N = int(gen.integers(2, 80))
            T = int(gen.integers(N, 600))
            seed = int(gen.integers(0, 2**31))
            idx = skip_sample_indices(T, N, derive_rng(seed, "skip")) + 1
            assert len(idx) == N
            assert np.all(np.diff(idx) >= 0)
            assert idx.min() >= 1 and idx.max() <= T
        assert skip_plan(10, 4, (2, 2, 2, 2)).indices == (2, 5, 8, 10)


def test_normalization_invariance():
    with criterion("normalization invariance (1000 frames, hand range, degenerate)", budget=5.0):
        gen = np.random.default_rng(55)
        for _ in range(1000):
            frame = gen.uniform(0.0, 1000.0, size=(55, 2))
            out = normalize_customized(frame)
            shift = gen.uniform(-500.0, 500.0, size=2)
            scale = float(np.exp(gen.uniform(-3.0, 3.0)))
            np.testing.assert_allclose(normalize_customized(frame + shift), out, rtol=0, atol=1e-9)
            np.testing.assert_allclose(normalize_customized(frame * scale), out, rtol=0, atol=1e-9)
            hands = out[13:]
            assert hands.min() >= -0.5 and hands.max() <= 0.5
            assert np.isfinite(out).all()
        for value in (0.0, 123.5):
            out = normalize_customized(np.full((55, 2), value))
            assert np.all(out == 0.0)
        part = gen.uniform(0.0, 1000.0, size=(55, 2))
        part[13:34] = part[13]
        out = normalize_customized(part)
        assert np.isfinite(out).all() and np.all(out[13:34] == 0.0)


def test_gradient_correctness():
    with criterion("gradient correctness (all tensors vs central differences)", budget=30.0):
        hyper = ModelHyper(vocab_size=5, hidden_dim=4, embed_dim=3, dropout_rate=0.0, max_target_len=6)
        gen = np.random.default_rng(7)
        params = init_params(hyper, gen)
        batch = make_batch([(gen.normal(size=(3, 110)), [4, 3, EOS]), (gen.normal(size=(3, 110)), [3, EOS])], hyper)
        _, grads = loss_and_grads(batch, params, hyper)
        worst = {}
        for name, arr in params.items():
            worst[name] = rel_error(grads[name], numeric_grad(lambda: forward_loss(batch, params, hyper), arr))
        bad = {k: v for k, v in worst.items() if not v < 1e-4}
        assert not bad, bad


def test_uniform_model_loss():
    with criterion("zero-weight model loss equals ln(vocab_size)"):
        gen = np.random.default_rng(3)
        for V in (5, 20, 137):
            hyper = ModelHyper(vocab_size=V, hidden_dim=8, embed_dim=4)
            batch = [(gen.normal(size=(6, 110)), [4, 4 % V, EOS]), (gen.normal(size=(6, 110)), [EOS])]
            assert abs(forward_loss(batch, zero_params(hyper), hyper) - math.log(V)) < 1e-9


def test_metric_oracles():
    with criterion("metric oracles (50 random pairs, worked examples)"):
        pairs = random_pairs(50)
        for h, r in pairs:
            stats = bleu_stats(h, r)
            assert all(tuple(stats[2 * n:2 * n + 2]) == brute_clipped(h, r, n) for n in range(1, 5))
            assert abs(bleu4([h], [r]) - brute_bleu([h], [r])) < 1e-12
            assert lcs_length(h, r) == brute_lcs(h, r)
        hyps, refs = zip(*pairs)
        assert abs(bleu4(hyps, refs) - brute_bleu(hyps, refs)) < 1e-12
        assert bleu4(["the cat sat on the mat".split()], ["the cat is on the mat".split()]) == 0.0
        assert abs(rouge_l("a b c d".split(), "a c b d".split()) - 0.75) < 1e-9
        assert abs(meteor_exact(["a", "b"], ["b", "a"]) - 0.5) < 1e-9
        for m in (1, 3, 6):
            seq = [str(i) for i in range(m)]
            assert abs(meteor_exact(seq, seq) - (1 - 0.5 / m**3)) < 1e-9


# -- full pipeline ------------------------------------------------------------

def run_pipeline(root):
    start = time.perf_counter()
    synth_generate(SynthConfig(), root / "data")
    cfg = load_config(None, {"manifest": str(root / "data" / "manifest.tsv"), "out_dir": str(root / "run")})
    pre = preprocess(cfg)
    trained = run_train(cfg)
    items = Translator(trained.checkpoint).translate_archive(pre.path, "test")
    report = evaluate_translations(items)
    return {
        "header": pre.header,
        "checksum": pre.checksum,
        "epochs": len(trained.history),
        "final_loss": trained.history[-1]["loss"],
        "report": report,
        "seconds": time.perf_counter() - start,
    }


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("e2e_a"))


@pytest.mark.slow
def test_end_to_end_learnability(first_run):
    r = first_run
    label = (f"end-to-end synthetic corpus: test BLEU-4 {r['report'].bleu4:.4f} >= 0.90, "
             f"ROUGE-L {r['report'].rouge_l:.4f} >= 0.90, N={r['header']['N']}, "
             f"augmented={r['header']['augmented']}, sampled={r['header']['sampled']}, "
             f"pipeline {r['seconds']:.1f}s")
    with criterion(label):
        assert r["epochs"] == 100
        assert r["header"]["augmented"] > 0 and r["header"]["sampled"] > 0
        assert r["report"].bleu4 >= 0.90, r["report"].bleu4
        assert r["report"].rouge_l >= 0.90, r["report"].rouge_l
        assert r["seconds"] < 15 * 60


@pytest.mark.slow
def test_determinism(first_run, tmp_path_factory):
    with criterion("determinism: archive checksum, final loss, metrics bit-identical"):
        second = run_pipeline(tmp_path_factory.mktemp("e2e_b"))
        assert second["checksum"] == first_run["checksum"]
        assert second["final_loss"].hex() == first_run["final_loss"].hex()
        a, b = first_run["report"], second["report"]
        assert [a.bleu4, a.rouge_l, a.meteor_exact] == [b.bleu4, b.rouge_l, b.meteor_exact]
        assert a.per_sentence == b.per_sentence
