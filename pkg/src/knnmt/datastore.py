"""Per-sentence tiny datastores built by forced decoding, with exact L2 search."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bm25 import RetrievalHit
from .corpus import BOS, ParallelCorpus
from .errors import BadMagic, DimensionMismatch
from .model import SeqModel

MAGIC = b"KNNS"
VERSION = 1
DEFAULT_K = 2


@dataclass(frozen=True)
class Neighbor:
    distance: float
    value: int
    entry_index: int


class Datastore:
    """Keys (hidden states) stacked row-wise, values are the next target token."""

    def __init__(self, keys: np.ndarray, values: np.ndarray, hidden_dim: int):
        keys = np.asarray(keys, dtype=np.float64).reshape(-1, hidden_dim)
        values = np.asarray(values, dtype=np.int64)
        if len(keys) != len(values):
            raise ValueError("keys and values differ in length")
        self.keys = keys
        self.values = values
        self.hidden_dim = hidden_dim

    def __len__(self) -> int:
        return len(self.values)

    def entries(self) -> list[tuple[np.ndarray, int]]:
        return [(self.keys[i], int(self.values[i])) for i in range(len(self))]

    @classmethod
    def empty(cls, hidden_dim: int) -> "Datastore":
        return cls(np.zeros((0, hidden_dim)), np.zeros(0, dtype=np.int64), hidden_dim)

    def dump(self, path: str | Path) -> None:
        """Debug dump; keys are narrowed to float32."""
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<III", VERSION, self.hidden_dim, len(self)))
            for key, value in zip(self.keys, self.values):
                fh.write(key.astype("<f4").tobytes())
                fh.write(struct.pack("<I", int(value)))

    @classmethod
    def load_dump(cls, path: str | Path) -> "Datastore":
        data = Path(path).read_bytes()
        if data[:4] != MAGIC:
            raise BadMagic(f"{path}: not a datastore dump")
        _, d, n = struct.unpack_from("<III", data, 4)
        rec = np.dtype([("key", "<f4", (d,)), ("value", "<u4")])
        arr = np.frombuffer(data, dtype=rec, count=n, offset=16)
        return cls(arr["key"].astype(np.float64), arr["value"].astype(np.int64), d)


def build_store(model: SeqModel, hits: Sequence[RetrievalHit], corpus: ParallelCorpus) -> Datastore:
    """Forced-decode each retrieved pair and record ``(F(x, y<t), y_t)`` for every t.

    The t=1 prediction (prefix ``[BOS]``) is included. Entries follow hit
    order, then target position.
    """
    keys: list[np.ndarray] = []
    values: list[int] = []
    for hit in hits:
        src, tgt = corpus.pairs[hit.pair_id]
        prefix = [BOS]
        for tok in tgt:
            h, _ = model.step(src, prefix)
            keys.append(h)
            values.append(tok)
            prefix.append(tok)
    if not keys:
        return Datastore.empty(model.hidden_dim)
    return Datastore(np.stack(keys), np.array(values), model.hidden_dim)


def knn_search(store: Datastore, query: np.ndarray, k: int = DEFAULT_K, squared: bool = False) -> list[Neighbor]:
    """Exact k nearest entries by L2 distance.

    Ties on distance are broken by value id, then entry index. With
    ``squared=True`` the reported distance is squared L2.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (store.hidden_dim,):
        raise DimensionMismatch(f"query shape {query.shape} vs store dimension {store.hidden_dim}")
    n = len(store)
    if n == 0:
        return []
    diff = store.keys - query
    dist = np.sum(diff * diff, axis=1)
    if not squared:
        dist = np.sqrt(dist)
    k = min(k, n)
    if k < n:
        # keep every entry tied with the k-th distance so tie-breaking sees them all
        kth = np.partition(dist, k - 1)[k - 1]
        cand = np.flatnonzero(dist <= kth)
    else:
        cand = np.arange(n)
    order = cand[np.lexsort((cand, store.values[cand], dist[cand]))[:k]]
    return [Neighbor(float(dist[i]), int(store.values[i]), int(i)) for i in order]
