"""Corpus-level BLEU-4 over token sequences."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

from .errors import EmptyInput, LengthMismatch

MAX_ORDER = 4
SMOOTH_METHODS = ("none", "add1")


@dataclass(frozen=True)
class EvalReport:
    bleu: float
    sentence_count: int
    brevity_penalty: float
    ngram_precisions: tuple[float, ...]
    sys_len: int
    ref_len: int
    smooth: str = "none"

    TSV_HEADER = "bleu\tsentences\tbp\tp1\tp2\tp3\tp4\tsys_len\tref_len\tsmooth"

    def to_tsv(self) -> str:
        fields = [self.bleu, self.sentence_count, self.brevity_penalty, *self.ngram_precisions,
                  self.sys_len, self.ref_len, self.smooth]
        return "\t".join(repr(f) if isinstance(f, float) else str(f) for f in fields)

    def table(self) -> str:
        precs = " / ".join(f"{100 * p:.1f}" for p in self.ngram_precisions)
        return (
            f"BLEU = {self.bleu:.2f}  {precs}  (BP = {self.brevity_penalty:.3f} "
            f"ratio = {self.sys_len / max(self.ref_len, 1):.3f} hyp_len = {self.sys_len} "
            f"ref_len = {self.ref_len}, sentences = {self.sentence_count}, smooth = {self.smooth})"
        )


def _ngrams(seq: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def corpus_bleu(
    hypotheses: Sequence[Sequence[Hashable]],
    references: Sequence[Sequence[Hashable]],
    smooth: str = "none",
) -> EvalReport:
    """BLEU with clipped n-gram counts pooled over the corpus.

    ``smooth="add1"`` adds one to numerator and denominator of an n>=2
    precision whose match count is zero; ``"none"`` leaves it at zero.
    """
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise EmptyInput("no sentences to score")
    if smooth not in SMOOTH_METHODS:
        raise ValueError(f"unknown smoothing {smooth!r}")
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    sys_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        sys_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, MAX_ORDER + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)

    precisions = []
    for n in range(1, MAX_ORDER + 1):
        m, t = matches[n - 1], totals[n - 1]
        if smooth == "add1" and n >= 2 and m == 0:
            m, t = m + 1, t + 1
        precisions.append(m / t if t else 0.0)

    if sys_len == 0:
        bp = 0.0
    elif sys_len <= ref_len:
        bp = math.exp(1.0 - ref_len / sys_len)
    else:
        bp = 1.0
    if min(precisions) > 0:
        bleu = bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER) * 100.0
    else:
        bleu = 0.0
    return EvalReport(bleu, len(hypotheses), bp, tuple(precisions), sys_len, ref_len, smooth)
