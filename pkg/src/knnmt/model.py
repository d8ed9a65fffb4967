"""Sequence-model interface and the count-based toy model used for testing.

A sequence model maps ``(source ids, target prefix)`` to a decoder hidden
vector and a next-token distribution. Distributions are plain float64
numpy vectors over the vocabulary (``ProbDist``).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import BOS, ParallelCorpus, Vocab
from .errors import BadMagic, EmptyCorpus, InvalidToken

ProbDist = np.ndarray
HiddenVec = np.ndarray

MAGIC = b"TOYM"
VERSION = 1
DEFAULT_DIM = 64
DEFAULT_WINDOW = 2
ALPHA = 0.1
DECAY = 0.5
# keys lie on a sphere of this radius, so distances span [0, 200] and the
# default temperature of 100 sits mid-range
RADIUS = 100.0


def check_probdist(p: np.ndarray, size: int | None = None, tol: float = 1e-9) -> None:
    """Raise ``ValueError`` unless ``p`` is a finite, non-negative, normalized vector."""
    if p.ndim != 1 or (size is not None and p.shape[0] != size):
        raise ValueError(f"distribution has shape {p.shape}, expected ({size},)")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("distribution has negative or non-finite entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"distribution sums to {p.sum()!r}")


class SeqModel(Protocol):
    hidden_dim: int
    vocab: Vocab

    def step(self, x: Sequence[int], y_prefix: Sequence[int]) -> tuple[HiddenVec, ProbDist]: ...


def _embeddings(seed: int, vocab_size: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    emb = rng.standard_normal((vocab_size, dim))
    return emb / np.linalg.norm(emb, axis=1, keepdims=True)


class ToyModel:
    """Smoothed target-side bigram LM with an embedding-mix hidden state.

    The hidden state is the sum of the mean source embedding and the last
    ``context_window`` target embeddings (decayed by 0.5 per step back),
    normalized and scaled to length ``RADIUS``. The next-token distribution
    ignores the source entirely.
    """

    def __init__(
        self,
        vocab: Vocab,
        bigram_counts: np.ndarray,
        seed: int,
        hidden_dim: int = DEFAULT_DIM,
        context_window: int = DEFAULT_WINDOW,
        alpha: float = ALPHA,
    ):
        v = len(vocab)
        if bigram_counts.shape != (v, v):
            raise ValueError(f"bigram table shape {bigram_counts.shape} does not match vocab size {v}")
        self.vocab = vocab
        self.seed = int(seed)
        self.hidden_dim = int(hidden_dim)
        self.context_window = int(context_window)
        self.alpha = float(alpha)
        self.bigram_counts = bigram_counts.astype(np.uint32)
        self.embed = _embeddings(self.seed, v, self.hidden_dim)
        counts = self.bigram_counts.astype(np.float64)
        self._probs = (counts + self.alpha) / (counts.sum(axis=1, keepdims=True) + self.alpha * v)
        self._decay = DECAY ** np.arange(self.context_window)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def _check(self, ids: Sequence[int]) -> None:
        v = len(self.vocab)
        for i in ids:
            if not 0 <= i < v:
                raise InvalidToken(f"token id {i} outside vocabulary of size {v}")

    def hidden(self, x: Sequence[int], y_prefix: Sequence[int]) -> HiddenVec:
        window = list(y_prefix[-self.context_window:])[::-1]
        h = self.embed[list(x)].mean(axis=0) + self._decay[: len(window)] @ self.embed[window]
        return h * (RADIUS / np.linalg.norm(h))

    def next_probs(self, y_prefix: Sequence[int]) -> ProbDist:
        return self._probs[y_prefix[-1]].copy()

    def step(self, x: Sequence[int], y_prefix: Sequence[int]) -> tuple[HiddenVec, ProbDist]:
        if not y_prefix or y_prefix[0] != BOS:
            raise ValueError("target prefix must start with BOS")
        if not x:
            raise ValueError("source must be non-empty")
        self._check(x)
        self._check(y_prefix)
        return self.hidden(x, y_prefix), self.next_probs(y_prefix)

    def save(self, path: str | Path) -> None:
        if self.context_window != DEFAULT_WINDOW or self.alpha != ALPHA:
            raise ValueError("only the default context window and smoothing can be persisted")
        v = len(self.vocab)
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQII", VERSION, self.seed, self.hidden_dim, v))
            fh.write(self.bigram_counts.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path, vocab: Vocab) -> "ToyModel":
        data = Path(path).read_bytes()
        if data[:4] != MAGIC:
            raise BadMagic(f"{path}: not a toy model file")
        version, seed, dim, v = struct.unpack_from("<IQII", data, 4)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        if v != len(vocab):
            raise ValueError(f"{path}: model vocab size {v} != supplied vocab size {len(vocab)}")
        off = 4 + struct.calcsize("<IQII")
        counts = np.frombuffer(data, dtype="<u4", count=v * v, offset=off).reshape(v, v)
        return cls(vocab, counts, seed, dim)


def fit_toy(
    corpus: ParallelCorpus,
    seed: int = 42,
    d: int = DEFAULT_DIM,
    context_window: int = DEFAULT_WINDOW,
) -> ToyModel:
    """Count BOS-prefixed, EOS-terminated target bigrams."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot fit a model on an empty corpus")
    v = len(corpus.vocab)
    counts = np.zeros((v, v), dtype=np.uint32)
    for _, tgt in corpus.pairs:
        seq = (BOS, *tgt)
        np.add.at(counts, (seq[:-1], seq[1:]), 1)
    return ToyModel(corpus.vocab, counts, seed, d, context_window)
