"""kNN token distribution, interpolation-weight policies and the per-step composition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .datastore import DEFAULT_K, Datastore, Neighbor, knn_search
from .errors import DimensionMismatch
from .model import ProbDist, SeqModel

DEFAULT_TEMPERATURE = 100.0


@dataclass(frozen=True)
class Fixed:
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"fixed lambda {self.lam} outside [0, 1]")


@dataclass(frozen=True)
class DistanceAware:
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class Trainable:
    weight: float
    bias: float

    def __post_init__(self):
        if not (math.isfinite(self.weight) and math.isfinite(self.bias)):
            raise ValueError("trainable lambda parameters must be finite")


LambdaPolicy = Union[Fixed, DistanceAware, Trainable]


def parse_policy(text: str) -> LambdaPolicy:
    """Parse ``fixed:<v>``, ``sk:<T>`` or ``trained:<path>``."""
    kind, _, arg = text.partition(":")
    if not arg:
        raise ValueError(f"bad lambda policy {text!r}")
    if kind == "fixed":
        return Fixed(float(arg))
    if kind == "sk":
        return DistanceAware(float(arg))
    if kind == "trained":
        from .trainer import load_policy

        t = load_policy(arg)
        return Trainable(t.weight, t.bias)
    raise ValueError(f"unknown lambda policy {kind!r}")


@dataclass(frozen=True)
class KnnConfig:
    k: int = DEFAULT_K
    temperature: float = DEFAULT_TEMPERATURE
    policy: LambdaPolicy = field(default_factory=DistanceAware)
    literal_eq3: bool = False
    squared_l2: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass
class StepOutcome:
    p_mt: ProbDist
    p_knn: ProbDist | None
    neighbors: list[Neighbor]
    d0: float | None
    lam: float
    p_final: ProbDist


def knn_distribution(neighbors: Sequence[Neighbor], temperature: float, vocab_size: int) -> ProbDist | None:
    """Softmax over negative distances, summed per retrieved token.

    Returns ``None`` for an empty neighbor list; :func:`interpolate` treats
    that as "no retrieval" and falls back to the model distribution.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    if not neighbors:
        return None
    dist = np.array([n.distance for n in neighbors])
    vals = np.array([n.value for n in neighbors])
    # shift by the minimum distance: unchanged after normalization, avoids underflow
    w = np.exp(-(dist - dist.min()) / temperature)
    p = np.bincount(vals, weights=w, minlength=vocab_size)
    return p / p.sum()


def compute_lambda(policy: LambdaPolicy, d0: float | None) -> float:
    if d0 is None:
        return 0.0
    if isinstance(policy, Fixed):
        return policy.lam
    if isinstance(policy, DistanceAware):
        return max(0.0, 1.0 - d0 / policy.temperature)
    if isinstance(policy, Trainable):
        z = policy.weight * d0 + policy.bias
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)
    raise TypeError(f"unknown policy {policy!r}")


def interpolate(p_mt: ProbDist, p_knn: ProbDist | None, lam: float, literal_eq3: bool = False) -> ProbDist:
    """``lam * p_knn + (1 - lam) * p_mt``; the model distribution when ``p_knn`` is None.

    ``literal_eq3`` swaps the weights so ``lam`` multiplies the model side.
    """
    if p_knn is None:
        return p_mt.copy()
    if p_knn.shape != p_mt.shape:
        raise DimensionMismatch(f"p_mt {p_mt.shape} vs p_knn {p_knn.shape}")
    if literal_eq3:
        return lam * p_mt + (1.0 - lam) * p_knn
    return lam * p_knn + (1.0 - lam) * p_mt


def knn_step(
    model: SeqModel,
    store: Datastore,
    x: Sequence[int],
    y_prefix: Sequence[int],
    cfg: KnnConfig,
) -> StepOutcome:
    h, p_mt = model.step(x, y_prefix)
    neighbors = knn_search(store, h, cfg.k, squared=cfg.squared_l2)
    p_knn = knn_distribution(neighbors, cfg.temperature, len(p_mt))
    d0 = neighbors[0].distance if neighbors else None
    lam = compute_lambda(cfg.policy, d0)
    p_final = interpolate(p_mt, p_knn, lam, cfg.literal_eq3)
    return StepOutcome(p_mt, p_knn, neighbors, d0, lam, p_final)
