"""BLEU-4 (corpus), ROUGE-L and an exact-match-only METEOR.

``meteor_exact`` has no stemming or synonym stages, so its values are not
comparable with scores from the full METEOR tool.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyCorpus, EmptySequence, LengthMismatch

ROUGE_BETA = 1.2
Tokens = Sequence[str]


def ngram_counts(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyp: Tokens, ref: Tokens, max_n: int = 4) -> list[int]:
    """``[c, r, match_1, total_1, ..., match_n, total_n]`` for one pair."""
    stats = [len(hyp), len(ref)]
    for n in range(1, max_n + 1):
        h, r = ngram_counts(hyp, n), ngram_counts(ref, n)
        stats.append(sum(min(c, r[g]) for g, c in h.items()))
        stats.append(max(len(hyp) - n + 1, 0))
    return stats


def bleu_from_stats(stats: Sequence[float], max_n: int = 4, smooth: float = 0.0) -> float:
    c, r = stats[0], stats[1]
    if c == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_n):
        match, total = stats[2 + 2 * n], stats[3 + 2 * n]
        if match == 0:
            if smooth <= 0 or total == 0:
                return 0.0
            match = smooth
        log_p += math.log(match / total)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p / max_n)


def bleu4(hypotheses: Sequence[Tokens], references: Sequence[Tokens], smooth: float = 0.0) -> float:
    """Corpus BLEU-4: n-gram matches and totals are summed before the precisions."""
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses for {len(references)} references")
    if not hypotheses:
        raise EmptyCorpus("no sentences to score")
    totals = [0] * 10
    for h, r in zip(hypotheses, references):
        totals = [a + b for a, b in zip(totals, bleu_stats(h, r))]
    return bleu_from_stats(totals, smooth=smooth)


def lcs_length(a: Tokens, b: Tokens) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis: Tokens, reference: Tokens, beta: float = ROUGE_BETA) -> float:
    if not hypothesis or not reference:
        raise EmptySequence("ROUGE-L needs non-empty sequences")
    m = lcs_length(hypothesis, reference)
    if m == 0:
        return 0.0
    p, r = m / len(hypothesis), m / len(reference)
    return (1 + beta**2) * p * r / (r + beta**2 * p)


def exact_alignment(hypothesis: Tokens, reference: Tokens) -> list[tuple[int, int]]:
    """Greedy left-to-right unigram alignment as ``(hyp_pos, ref_pos)`` pairs.

    Each hypothesis token takes an unused reference occurrence of the same
    word, preferring the one that extends the current chunk, else the earliest.
    """
    free: dict[str, list[int]] = {}
    for j, tok in enumerate(reference):
        free.setdefault(tok, []).append(j)
    pairs: list[tuple[int, int]] = []
    last: tuple[int, int] | None = None
    for i, tok in enumerate(hypothesis):
        slots = free.get(tok)
        if not slots:
            continue
        if last is not None and last[0] == i - 1 and last[1] + 1 in slots:
            j = last[1] + 1
        else:
            j = slots[0]
        slots.remove(j)
        last = (i, j)
        pairs.append(last)
    return pairs


def count_chunks(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_exact(hypothesis: Tokens, reference: Tokens) -> float:
    if not hypothesis or not reference:
        raise EmptySequence("METEOR needs non-empty sequences")
    pairs = exact_alignment(hypothesis, reference)
    m = len(pairs)
    if m == 0:
        return 0.0
    p, r = m / len(hypothesis), m / len(reference)
    f_mean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (count_chunks(pairs) / m) ** 3
    return f_mean * (1 - penalty)


@dataclass
class SentenceScore:
    id: str
    bleu4: float
    rouge_l: float
    meteor_exact: float


@dataclass
class EvalReport:
    bleu4: float
    rouge_l: float
    meteor_exact: float
    per_sentence: list[SentenceScore] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "bleu4", "rouge_l", "meteor_exact"])
        for s in self.per_sentence:
            w.writerow([s.id, *(repr(float(v)) for v in (s.bleu4, s.rouge_l, s.meteor_exact))])
        w.writerow(["CORPUS", *(repr(float(v)) for v in (self.bleu4, self.rouge_l, self.meteor_exact))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["id", "bleu4", "rouge_l", "meteor_exact"]:
            raise ValueError("not an evaluation CSV")
        per = [SentenceScore(r[0], float(r[1]), float(r[2]), float(r[3])) for r in rows[1:] if r[0] != "CORPUS"]
        corpus = [r for r in rows[1:] if r[0] == "CORPUS"]
        if len(corpus) != 1:
            raise ValueError("evaluation CSV must have exactly one CORPUS row")
        c = corpus[0]
        return cls(float(c[1]), float(c[2]), float(c[3]), per)


def _score(tokens: Tokens, other: Tokens, fn) -> float:
    # an empty hypothesis scores zero rather than aborting the whole corpus
    if not tokens or not other:
        return 0.0
    return fn(tokens, other)


def evaluate_corpus(hypotheses: Sequence[Tokens], references: Sequence[Tokens],
                    ids: Sequence[str] | None = None, smooth: float = 0.0) -> EvalReport:
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses for {len(references)} references")
    if not hypotheses:
        raise EmptyCorpus("no sentences to score")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(hypotheses))]
    per = []
    for sid, h, r in zip(ids, hypotheses, references):
        per.append(SentenceScore(
            sid,
            bleu_from_stats(bleu_stats(h, r), smooth=smooth),
            _score(h, r, rouge_l),
            _score(h, r, meteor_exact),
        ))
    return EvalReport(
        bleu4(hypotheses, references, smooth=smooth),
        math.fsum(s.rouge_l for s in per) / len(per),
        math.fsum(s.meteor_exact for s in per) / len(per),
        per,
    )
