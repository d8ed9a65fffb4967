"""Wall-clock overhead of kNN decoding relative to the bare model."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Sequence

from .bm25 import DEFAULT_DEPTH, Bm25Index
from .corpus import ParallelCorpus
from .decode import translate, translate_bare
from .interp import KnnConfig
from .model import SeqModel


@dataclass(frozen=True)
class BenchReport:
    base_tokens_per_sec: float
    knn_tokens_per_sec: float
    speed_drop_pct: float
    base_seconds: float
    knn_seconds: float
    base_tokens: int
    knn_tokens: int
    repeats: int

    TSV_HEADER = ("base_tok_s\tknn_tok_s\tspeed_drop_pct\tbase_s\tknn_s"
                  "\tbase_tokens\tknn_tokens\trepeats")

    def to_tsv(self) -> str:
        return "\t".join(
            repr(v) if isinstance(v, float) else str(v)
            for v in (self.base_tokens_per_sec, self.knn_tokens_per_sec, self.speed_drop_pct,
                      self.base_seconds, self.knn_seconds, self.base_tokens, self.knn_tokens,
                      self.repeats)
        )

    def table(self) -> str:
        return "\n".join([
            f"{'mode':<6}{'tokens':>10}{'seconds':>12}{'tok/s':>12}",
            f"{'base':<6}{self.base_tokens:>10}{self.base_seconds:>12.4f}{self.base_tokens_per_sec:>12.1f}",
            f"{'knn':<6}{self.knn_tokens:>10}{self.knn_seconds:>12.4f}{self.knn_tokens_per_sec:>12.1f}",
            f"speed drop: {self.speed_drop_pct:.2f}% (median of {self.repeats})",
        ])


def make_report(base_tokens: int, base_seconds: float, knn_tokens: int, knn_seconds: float,
                repeats: int) -> BenchReport:
    base_rate = base_tokens / base_seconds
    knn_rate = knn_tokens / knn_seconds
    return BenchReport(base_rate, knn_rate, 100.0 * (1.0 - knn_rate / base_rate),
                       base_seconds, knn_seconds, base_tokens, knn_tokens, repeats)


def benchmark(
    model: SeqModel,
    index: Bm25Index | None,
    ref_corpus: ParallelCorpus | None,
    test_sources: Sequence[Sequence[int]],
    cfg: KnnConfig,
    beam: int = 5,
    repeats: int = 3,
    depth: int = DEFAULT_DEPTH,
    max_len: int | None = None,
) -> BenchReport:
    """Median-of-repeats timing of bare vs kNN decoding on the same sources.

    Token counts include the end-of-sentence step. One untimed warm-up pass
    of each mode runs first; modes alternate within each repeat.
    """
    if repeats < 3:
        raise ValueError("repeats must be >= 3")

    def run_bare() -> int:
        return sum(len(translate_bare(model, s, beam, max_len)) + 1 for s in test_sources)

    def run_knn() -> int:
        return sum(
            len(translate(model, index, ref_corpus, s, cfg, beam, max_len, depth)) + 1
            for s in test_sources
        )

    def timed(fn) -> tuple[int, float]:
        t0 = time.perf_counter()
        n = fn()
        return n, time.perf_counter() - t0

    run_bare()
    run_knn()
    base_times, knn_times = [], []
    base_tokens = knn_tokens = 0
    for _ in range(repeats):
        base_tokens, t = timed(run_bare)
        base_times.append(t)
        knn_tokens, t = timed(run_knn)
        knn_times.append(t)
    return make_report(base_tokens, statistics.median(base_times), knn_tokens,
                       statistics.median(knn_times), repeats)
