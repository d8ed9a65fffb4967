"""Fit the single-layer interpolation network ``lambda = sigmoid(W * d0 + B)``.

Training examples come from forced decoding of a dev set: at each target
position the label is 1 when the kNN distribution gives the gold token at
least as much probability as the model distribution does.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bm25 import DEFAULT_DEPTH, Bm25Index, search
from .corpus import BOS, ParallelCorpus
from .datastore import build_store, knn_search
from .errors import BadMagic, EmptyDevSet, NoExamples, SingleClassWarning
from .interp import KnnConfig, knn_distribution
from .model import SeqModel

log = logging.getLogger(__name__)

CLAMP = 1e-7
POLICY_HEADER = "KNNLAMBDA v1"


@dataclass(frozen=True)
class TrainExample:
    d0: float
    label: int


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_epochs: int = 500
    tol: float = 1e-7
    class_weighted: bool = False
    online: bool = False
    shuffle: bool = False
    seed: int = 42

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class TrainedLambda:
    weight: float
    bias: float
    train_loss: float | None = None
    pos_fraction: float | None = None
    epochs_run: int | None = None


def _sentence_examples(model, index, ref, src, tgt, cfg: KnnConfig, depth: int) -> list[TrainExample]:
    store = build_store(model, search(index, src, depth), ref)
    out = []
    prefix = [BOS]
    for gt in tgt:
        h, p_mt = model.step(src, prefix)
        neighbors = knn_search(store, h, cfg.k, squared=cfg.squared_l2)
        prefix.append(gt)
        if not neighbors:
            continue
        p_knn = knn_distribution(neighbors, cfg.temperature, len(p_mt))
        out.append(TrainExample(neighbors[0].distance, int(p_knn[gt] >= p_mt[gt])))
    return out


def collect_examples(
    model: SeqModel,
    index: Bm25Index,
    dev: ParallelCorpus,
    ref: ParallelCorpus,
    cfg: KnnConfig,
    depth: int = DEFAULT_DEPTH,
    workers: int = 1,
) -> list[TrainExample]:
    """Forced-decode every dev pair against its own retrieved tiny datastore.

    Steps whose datastore is empty yield no example.
    """
    if len(dev) == 0:
        raise EmptyDevSet("dev corpus is empty")

    def one(pair):
        return _sentence_examples(model, index, ref, pair[0], pair[1], cfg, depth)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_sentence = list(pool.map(one, dev.pairs))
    else:
        per_sentence = [one(p) for p in dev.pairs]
    return [ex for exs in per_sentence for ex in exs]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def class_weights(labels: np.ndarray, weighted: bool) -> tuple[float, float]:
    """Inverse-frequency weights ``N / (2 N_c)``; ``(1, 1)`` when unweighted."""
    if not weighted:
        return 1.0, 1.0
    n = len(labels)
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    w_pos = n / (2 * n_pos) if n_pos else 0.0
    w_neg = n / (2 * n_neg) if n_neg else 0.0
    return w_pos, w_neg


def loss_and_grad(
    weight: float,
    bias: float,
    d0: np.ndarray,
    labels: np.ndarray,
    w_pos: float = 1.0,
    w_neg: float = 1.0,
) -> tuple[float, float, float]:
    """Mean weighted BCE and its gradient with respect to (weight, bias).

    Predictions are clamped to ``[1e-7, 1 - 1e-7]`` inside the logs; the
    gradient is zero where the clamp is active.
    """
    p = _sigmoid(weight * d0 + bias)
    pc = np.clip(p, CLAMP, 1.0 - CLAMP)
    loss = -np.mean(w_pos * labels * np.log(pc) + w_neg * (1 - labels) * np.log(1.0 - pc))
    active = (p > CLAMP) & (p < 1.0 - CLAMP)
    dz = np.where(active, -w_pos * labels * (1.0 - p) + w_neg * (1 - labels) * p, 0.0)
    return float(loss), float(np.mean(dz * d0)), float(np.mean(dz))


def fit(examples: Sequence[TrainExample], cfg: TrainConfig = TrainConfig(), history: list | None = None) -> TrainedLambda:
    """Gradient descent on the (optionally class-weighted) BCE.

    Descent runs on the standardized feature ``(d0 - mean) / std``; the
    result is mapped back so the returned (W, B) apply to raw ``d0``. The
    prediction function is the same either way, but raw distances of order
    tens make plain descent oscillate at any useful learning rate.

    Full-batch by default. ``cfg.online`` applies one update per example in
    collection order, as a literal per-token training loop would. Pass a
    list as ``history`` to receive the per-epoch full-batch loss.
    """
    if not examples:
        raise NoExamples("no training examples")
    d0 = np.array([e.d0 for e in examples], dtype=np.float64)
    y = np.array([e.label for e in examples], dtype=np.float64)
    pos_fraction = float(y.mean())
    if pos_fraction in (0.0, 1.0):
        warnings.warn(f"all {len(y)} examples have label {int(y[0])}", SingleClassWarning, stacklevel=2)
    w_pos, w_neg = class_weights(y, cfg.class_weighted)
    mu = float(d0.mean())
    sd = float(d0.std()) or 1.0
    x = (d0 - mu) / sd
    rng = np.random.default_rng(cfg.seed)

    a = c = 0.0
    prev, _, _ = loss_and_grad(a, c, x, y, w_pos, w_neg)
    epochs = 0
    for epochs in range(1, cfg.max_epochs + 1):
        if cfg.online:
            order = rng.permutation(len(y)) if cfg.shuffle else range(len(y))
            for i in order:
                _, ga, gc = loss_and_grad(a, c, x[i : i + 1], y[i : i + 1], w_pos, w_neg)
                a -= cfg.learning_rate * ga
                c -= cfg.learning_rate * gc
        else:
            _, ga, gc = loss_and_grad(a, c, x, y, w_pos, w_neg)
            a -= cfg.learning_rate * ga
            c -= cfg.learning_rate * gc
        loss, _, _ = loss_and_grad(a, c, x, y, w_pos, w_neg)
        if history is not None:
            history.append(loss)
        done = abs(prev - loss) < cfg.tol
        prev = loss
        if done:
            break
    weight = a / sd
    bias = c - a * mu / sd
    log.info("fit: W=%.6g B=%.6g loss=%.6g epochs=%d pos=%.3f", weight, bias, prev, epochs, pos_fraction)
    return TrainedLambda(weight, bias, prev, pos_fraction, epochs)


def save_policy(t: TrainedLambda, path: str | Path) -> None:
    Path(path).write_text(f"{POLICY_HEADER}\nW={t.weight!r}\nB={t.bias!r}\n", encoding="utf-8")


def load_policy(path: str | Path) -> TrainedLambda:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != POLICY_HEADER:
        raise BadMagic(f"{path}: not a trained lambda policy")
    fields = dict(line.split("=", 1) for line in lines[1:] if "=" in line)
    try:
        weight, bias = float(fields["W"]), float(fields["B"])
    except KeyError as e:
        raise ValueError(f"{path}: missing field {e}") from None
    if not (math.isfinite(weight) and math.isfinite(bias)):
        raise ValueError(f"{path}: non-finite parameters")
    return TrainedLambda(weight, bias)
