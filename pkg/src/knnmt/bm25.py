"""Embedded Okapi BM25 index over the source side of a parallel corpus."""

from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import ParallelCorpus
from .errors import BadMagic, EmptyCorpus

MAGIC = b"BM25"
VERSION = 1
DEFAULT_DEPTH = 32


@dataclass(frozen=True)
class RetrievalHit:
    pair_id: int
    score: float


class Bm25Index:
    """Inverted index mapping term id -> (doc ids, term frequencies).

    Postings for each term are stored as an ``(m, 2)`` int array sorted by
    doc id. The index is read-only after construction.
    """

    def __init__(self, postings: dict[int, np.ndarray], doc_lengths: np.ndarray, k1: float, b: float):
        self.postings = postings
        self.doc_lengths = np.asarray(doc_lengths, dtype=np.int64)
        self.doc_count = len(self.doc_lengths)
        self.avg_doc_length = float(self.doc_lengths.mean()) if self.doc_count else 0.0
        self.k1 = float(k1)
        self.b = float(b)
        n = self.doc_count
        self.idf = {
            term: math.log((n - len(p) + 0.5) / (len(p) + 0.5) + 1.0) for term, p in postings.items()
        }
        # per-document length normalization, shared by every query term
        self._norm = self.k1 * (1.0 - self.b + self.b * self.doc_lengths / max(self.avg_doc_length, 1e-12))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Bm25Index):
            return NotImplemented
        return (
            self.k1 == other.k1
            and self.b == other.b
            and np.array_equal(self.doc_lengths, other.doc_lengths)
            and self.postings.keys() == other.postings.keys()
            and all(np.array_equal(p, other.postings[t]) for t, p in self.postings.items())
        )

    def term_score(self, term: int) -> tuple[np.ndarray, np.ndarray]:
        """Doc ids containing ``term`` and that term's BM25 contribution to each."""
        post = self.postings[term]
        docs, tf = post[:, 0], post[:, 1].astype(np.float64)
        contrib = self.idf[term] * tf * (self.k1 + 1.0) / (tf + self._norm[docs])
        return docs, contrib

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQdd", VERSION, self.doc_count, self.k1, self.b))
            fh.write(self.doc_lengths.astype("<u4").tobytes())
            for term in sorted(self.postings):
                post = self.postings[term]
                fh.write(struct.pack("<II", term, len(post)))
                fh.write(post.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        data = Path(path).read_bytes()
        if data[:4] != MAGIC:
            raise BadMagic(f"{path}: not a BM25 index")
        version, n, k1, b = struct.unpack_from("<IQdd", data, 4)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported index version {version}")
        off = 4 + struct.calcsize("<IQdd")
        doc_lengths = np.frombuffer(data, dtype="<u4", count=n, offset=off).astype(np.int64)
        off += 4 * n
        postings: dict[int, np.ndarray] = {}
        while off < len(data):
            term, m = struct.unpack_from("<II", data, off)
            off += 8
            post = np.frombuffer(data, dtype="<u4", count=2 * m, offset=off)
            postings[term] = post.reshape(m, 2).astype(np.int64)
            off += 8 * m
        return cls(postings, doc_lengths, k1, b)


def build_index(corpus: ParallelCorpus, k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    """Index the source side of every pair in ``corpus``."""
    return index_sources(corpus.sources(), k1, b)


def index_sources(sources: Sequence[Sequence[int]], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    if len(sources) == 0:
        raise EmptyCorpus("cannot index an empty corpus")
    if k1 <= 0:
        raise ValueError("k1 must be positive")
    if not 0.0 <= b <= 1.0:
        raise ValueError("b must lie in [0, 1]")
    lists: dict[int, list[tuple[int, int]]] = {}
    lengths = []
    for doc_id, src in enumerate(sources):
        lengths.append(len(src))
        for term, tf in Counter(src).items():
            lists.setdefault(term, []).append((doc_id, tf))
    postings = {term: np.array(p, dtype=np.int64) for term, p in lists.items()}
    return Bm25Index(postings, np.array(lengths), k1, b)


def search(index: Bm25Index, query: Sequence[int], n: int = DEFAULT_DEPTH) -> list[RetrievalHit]:
    """Top-``n`` documents by BM25 score, ties broken by lower pair id.

    Repeated query terms contribute once per occurrence. Documents with no
    query term are never returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    scores = np.zeros(index.doc_count)
    touched = np.zeros(index.doc_count, dtype=bool)
    for term in query:
        if term not in index.postings:
            continue
        docs, contrib = index.term_score(term)
        scores[docs] += contrib
        touched[docs] = True
    cand = np.flatnonzero(touched)
    if cand.size == 0:
        return []
    order = np.lexsort((cand, -scores[cand]))[:n]
    return [RetrievalHit(int(cand[i]), float(scores[cand[i]])) for i in order]
