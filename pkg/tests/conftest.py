from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from knnmt.bm25 import Bm25Index, build_index
from knnmt.corpus import ParallelCorpus, Vocab, encode_pairs, tokenize
from knnmt.model import ToyModel, fit_toy
from knnmt.synth import two_domain_splits

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "knnmt" / "data" / "toy"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def corpus_from_text(pairs: list[tuple[str, str]], vocab: Vocab | None = None) -> ParallelCorpus:
    tokenized = [(tokenize(s), tokenize(t)) for s, t in pairs]
    if vocab is None:
        vocab = Vocab.build(x for p in tokenized for x in p)
    return encode_pairs(tokenized, vocab)


@pytest.fixture
def tiny_corpus() -> ParallelCorpus:
    return corpus_from_text([
        ("das haus ist klein", "the house is small"),
        ("das haus ist gross", "the house is big"),
        ("der hund bellt", "the dog barks"),
        ("die katze schlaeft", "the cat sleeps"),
        ("der hund schlaeft", "the dog sleeps"),
    ])


@pytest.fixture
def tiny_model(tiny_corpus) -> ToyModel:
    return fit_toy(tiny_corpus, seed=3)


@dataclass
class TwoDomain:
    vocab: Vocab
    train_a: ParallelCorpus
    ref_b: ParallelCorpus
    dev_b: ParallelCorpus
    test_b: ParallelCorpus
    model: ToyModel
    index: Bm25Index


def make_two_domain(seed: int = 7, n_train: int = 2000, n_dev: int = 200, n_test: int = 200) -> TwoDomain:
    splits = two_domain_splits(seed, n_train, n_dev, n_test)
    tok = {k: [(tokenize(s), tokenize(t)) for s, t in v] for k, v in splits.items()}
    vocab = Vocab.build(x for k in ("train_a", "ref_b", "dev_b") for p in tok[k] for x in p)
    c = {k: encode_pairs(v, vocab) for k, v in tok.items()}
    model = fit_toy(c["train_a"], seed=42)
    return TwoDomain(vocab, c["train_a"], c["ref_b"], c["dev_b"], c["test_b"], model, build_index(c["ref_b"]))


@pytest.fixture(scope="session")
def two_domain() -> TwoDomain:
    return make_two_domain()


@pytest.fixture(scope="session")
def small_domain() -> TwoDomain:
    return make_two_domain(seed=11, n_train=300, n_dev=30, n_test=40)
