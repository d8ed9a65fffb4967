"""Greedy and beam decoding over (possibly kNN-interpolated) next-token distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bm25 import DEFAULT_DEPTH, Bm25Index, search
from .corpus import BOS, EOS, ParallelCorpus
from .datastore import Datastore, build_store
from .interp import KnnConfig, knn_step
from .model import ProbDist, SeqModel

NextDist = Callable[[list[int]], ProbDist]


@dataclass(frozen=True)
class BeamHyp:
    tokens: tuple[int, ...]
    logprob: float
    finished: bool

    def output(self) -> list[int]:
        """Tokens without the leading BOS and trailing EOS."""
        toks = list(self.tokens[1:])
        if toks and toks[-1] == EOS:
            toks.pop()
        return toks


def default_max_len(source: Sequence[int]) -> int:
    return 2 * len(source) + 10


def greedy(next_dist: NextDist, max_len: int) -> BeamHyp:
    """Argmax decoding; equal probabilities resolve to the lowest token id."""
    prefix = [BOS]
    logprob = 0.0
    for _ in range(max_len):
        p = next_dist(prefix)
        tok = int(np.argmax(p))
        logprob += float(np.log(p[tok]))
        prefix.append(tok)
        if tok == EOS:
            return BeamHyp(tuple(prefix), logprob, True)
    return BeamHyp(tuple(prefix), logprob, False)


def beam_search(next_dist: NextDist, beam: int, max_len: int, length_norm: bool = False) -> BeamHyp:
    """Beam search on accumulated log probability.

    Candidates are ranked by score, then token sequence for determinism.
    An EOS candidate ranked inside the top ``beam`` is finalized; the search
    stops once ``beam`` hypotheses have finished, or when no live
    hypothesis can still beat the best finished one.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    alive = [BeamHyp((BOS,), 0.0, False)]
    finished: list[BeamHyp] = []

    for _ in range(max_len):
        cands: list[tuple[float, tuple[int, ...]]] = []
        for hyp in alive:
            p = next_dist(list(hyp.tokens))
            with np.errstate(divide="ignore"):
                lp = np.log(p)
            width = min(2 * beam, len(lp))
            top = np.lexsort((np.arange(len(lp)), -lp))[:width]
            for tok in top:
                if np.isfinite(lp[tok]):
                    cands.append((hyp.logprob + float(lp[tok]), hyp.tokens + (int(tok),)))
        cands.sort(key=lambda c: (-c[0], c[1]))
        alive = []
        for rank, (score, toks) in enumerate(cands):
            if toks[-1] == EOS:
                if rank < beam:
                    finished.append(BeamHyp(toks, score, True))
            elif len(alive) < beam:
                alive.append(BeamHyp(toks, score, False))
        if len(finished) >= beam or not alive:
            break
        if finished and not length_norm and max(h.logprob for h in finished) >= alive[0].logprob:
            break
    pool = finished or alive
    return min(pool, key=lambda h: (-_score(h, length_norm), h.tokens))


def decode(next_dist: NextDist, beam: int, max_len: int, length_norm: bool = False) -> BeamHyp:
    """Greedy for ``beam == 1``; otherwise beam search anchored on the greedy path.

    Plain beam search can prune the greedy prefix and end below it. The
    greedy hypothesis is decoded as well and returned when it finishes with
    a better score, so a wider beam never scores worse than greedy.
    Distributions are memoized per prefix, so the greedy pass mostly
    re-reads steps the beam already computed.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if beam == 1:
        return greedy(next_dist, max_len)
    cache: dict[tuple[int, ...], ProbDist] = {}

    def cached(prefix: list[int]) -> ProbDist:
        key = tuple(prefix)
        if key not in cache:
            cache[key] = next_dist(prefix)
        return cache[key]

    best = beam_search(cached, beam, max_len, length_norm)
    anchor = greedy(cached, max_len)
    if anchor.finished and (not best.finished or _score(anchor, length_norm) > _score(best, length_norm)):
        return anchor
    return best


def _score(h: BeamHyp, length_norm: bool) -> float:
    return h.logprob / max(len(h.tokens) - 1, 1) if length_norm else h.logprob


def sentence_store(
    model: SeqModel,
    index: Bm25Index | None,
    ref_corpus: ParallelCorpus | None,
    source: Sequence[int],
    depth: int = DEFAULT_DEPTH,
) -> Datastore:
    """Retrieve reference pairs for ``source`` and forced-decode them into a datastore."""
    if index is None or ref_corpus is None or len(ref_corpus) == 0:
        return Datastore.empty(model.hidden_dim)
    return build_store(model, search(index, source, depth), ref_corpus)


def translate(
    model: SeqModel,
    index: Bm25Index | None,
    ref_corpus: ParallelCorpus | None,
    source: Sequence[int],
    cfg: KnnConfig,
    beam: int = 5,
    max_len: int | None = None,
    depth: int = DEFAULT_DEPTH,
    length_norm: bool = False,
) -> list[int]:
    """Retrieve, build the sentence's datastore once, and decode with kNN interpolation.

    ``index=None`` (or an empty reference corpus) decodes with the bare model.
    """
    store = sentence_store(model, index, ref_corpus, source, depth)
    src = list(source)

    def next_dist(prefix: list[int]) -> ProbDist:
        return knn_step(model, store, src, prefix, cfg).p_final

    max_len = default_max_len(source) if max_len is None else max_len
    return decode(next_dist, beam, max_len, length_norm).output()


def translate_bare(
    model: SeqModel,
    source: Sequence[int],
    beam: int = 5,
    max_len: int | None = None,
    length_norm: bool = False,
) -> list[int]:
    src = list(source)

    def next_dist(prefix: list[int]) -> ProbDist:
        return model.step(src, prefix)[1]

    max_len = default_max_len(source) if max_len is None else max_len
    return decode(next_dist, beam, max_len, length_norm).output()
