"""Corpus BLEU and the relative-improvement arithmetic of the transfer grids.

BLEU-4: clipped n-gram precision aggregated over the corpus, uniform 1/4
weights, brevity penalty exp(1 - ref_len/hyp_len) when the hypothesis side
is shorter. No smoothing by default; any zero precision zeroes the score.
Inputs are pre-tokenized, so tokenization is a whitespace split and nothing
else. Precisions are kept as exact rationals (match count / ngram count).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Sequence

from .errors import EmptyCorpusError, LengthMismatchError, ZeroBaselineError

NGRAM_ORDER = 4


@dataclass(frozen=True)
class BleuResult:
    score: float                      # 0..100
    precisions: tuple[Fraction, ...]  # clipped matches / candidate ngrams, per order
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: tuple[int, ...] = ()     # raw clipped match counts per order
    totals: tuple[int, ...] = ()      # raw candidate ngram counts per order


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str],
                max_order: int = NGRAM_ORDER, smooth_add_one: bool = False) -> BleuResult:
    """Corpus-level BLEU of hypothesis lines against one reference each.

    smooth_add_one adds 1 to numerator and denominator of orders above 1,
    useful for eyeballing near-empty overlaps; reported scores leave it off.
    Orders with no candidate n-grams at all (corpus shorter than the order)
    drop out of the geometric mean instead of zeroing it, so identical
    corpora score 100 regardless of line lengths.
    """
    if len(hypotheses) != len(references):
        raise LengthMismatchError(
            f"{len(hypotheses)} hypothesis lines vs {len(references)} reference lines"
        )
    if not hypotheses:
        raise EmptyCorpusError("cannot score an empty corpus")

    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hyp_line, ref_line in zip(hypotheses, references):
        hyp = hyp_line.split()
        ref = ref_line.split()
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref, n)
            totals[n - 1] += sum(hyp_counts.values())
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())

    precisions = tuple(
        Fraction(m, t) if t > 0 else Fraction(0, 1) for m, t in zip(matches, totals)
    )

    if hyp_len == 0:
        return BleuResult(0.0, precisions, 0.0, hyp_len, ref_len,
                          tuple(matches), tuple(totals))
    brevity_penalty = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)

    logs = []
    score = None
    for n in range(1, max_order + 1):
        m, t = matches[n - 1], totals[n - 1]
        if t == 0:
            continue
        if smooth_add_one and n > 1:
            m, t = m + 1, t + 1
        if m == 0:
            score = 0.0
            break
        logs.append(math.log(m / t))
    if score is None:
        score = 0.0 if not logs else 100.0 * brevity_penalty * math.exp(sum(logs) / len(logs))
    return BleuResult(score, precisions, brevity_penalty, hyp_len, ref_len,
                      tuple(matches), tuple(totals))


def percent_improvement(attacked_model_bleu: float, clean_model_bleu: float) -> float:
    """Relative BLEU change, in percent, against the clean-trained model."""
    if clean_model_bleu <= 0:
        raise ZeroBaselineError("clean-model BLEU must be positive to compute a delta")
    return (attacked_model_bleu - clean_model_bleu) / clean_model_bleu * 100.0


def mark_best(values: Sequence[float]) -> set[int]:
    """Indices attaining the maximum (all of them, on ties)."""
    if not values:
        raise ValueError("mark_best needs at least one value")
    best = max(values)
    return {i for i, v in enumerate(values) if v == best}


def round_half_up(value: float, ndigits: int = 1) -> float:
    """Decimal round-half-up on the printed value (2.25 -> 2.3, not 2.2)."""
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def format_bleu_line(result: BleuResult) -> str:
    """Fixed machine-parseable summary:
    BLEU=<x.x> P=<p1/p2/p3/p4> BP=<b.bbb> len=<hyp>/<ref>
    with precisions printed in percent."""
    precisions = "/".join(f"{round_half_up(float(p) * 100.0, 1):.1f}" for p in result.precisions)
    return (
        f"BLEU={round_half_up(result.score, 1):.1f} "
        f"P={precisions} "
        f"BP={result.brevity_penalty:.3f} "
        f"len={result.hyp_len}/{result.ref_len}"
    )
