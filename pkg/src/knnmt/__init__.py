"""Sentence-adaptive kNN-MT: BM25-retrieved tiny datastores, kNN interpolation, trainable lambda."""

from .bleu import EvalReport, corpus_bleu
from .bm25 import Bm25Index, RetrievalHit, build_index, search
from .corpus import BOS, EOS, PAD, UNK, ParallelCorpus, Vocab, load_parallel, tokenize
from .datastore import Datastore, Neighbor, build_store, knn_search
from .decode import translate, translate_bare
from .interp import (
    DistanceAware,
    Fixed,
    KnnConfig,
    StepOutcome,
    Trainable,
    compute_lambda,
    interpolate,
    knn_distribution,
    knn_step,
)
from .model import ToyModel, fit_toy
from .trainer import TrainConfig, TrainedLambda, TrainExample, collect_examples, fit, load_policy, save_policy

__version__ = "0.1.0"
