"""Seeded template grammars producing synthetic parallel "domains".

A domain is an inventory of multi-word terms (fixed source/target phrase
pairs) strung together by connector words shared across domains. Each
sentence uses distinct terms, so every two-token target context occurs at
most once per sentence. Target phrases reverse word order inside some
terms, a stand-in for local reordering.

Run as a module to write a fixture directory::

    python -m knnmt.synth --out fixtures/toy --seed 7
"""

from __future__ import annotations

import argparse
import random
from dataclasses import dataclass
from pathlib import Path

SRC_SYLLABLES = ["ka", "lo", "mi", "ne", "ru", "sa", "to", "vi", "ze", "pu", "da", "fe"]
TGT_SYLLABLES = ["bor", "gan", "hel", "jit", "kum", "las", "mor", "nep", "tor", "wix", "yol", "zum"]

N_CONNECTORS = 6
N_TERMS = 40
TERM_LEN = (2, 4)
TERMS_PER_SENTENCE = (2, 4)

Phrase = tuple[tuple[str, ...], tuple[str, ...]]


@dataclass
class Grammar:
    terms: list[Phrase]
    connectors: list[tuple[str, str]]

    def sample(self, rng: random.Random) -> tuple[str, str]:
        n = rng.randint(*TERMS_PER_SENTENCE)
        picked = rng.sample(self.terms, n)
        src: list[str] = []
        tgt: list[str] = []
        for i, (s, t) in enumerate(picked):
            if i:
                cs, ct = rng.choice(self.connectors)
                src.append(cs)
                tgt.append(ct)
            src.extend(s)
            tgt.extend(t)
        return " ".join(src), " ".join(tgt)


class _WordMaker:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.seen: set[str] = set()

    def make(self, syllables: list[str], lo: int, hi: int) -> str:
        while True:
            word = "".join(self.rng.choice(syllables) for _ in range(self.rng.randint(lo, hi)))
            if word not in self.seen:
                self.seen.add(word)
                return word

    def pair(self, size: tuple[int, int] = (2, 3)) -> tuple[str, str]:
        return self.make(SRC_SYLLABLES, *size), self.make(TGT_SYLLABLES, *size)


def _term(rng: random.Random, words: _WordMaker) -> Phrase:
    pairs = [words.pair() for _ in range(rng.randint(*TERM_LEN))]
    src = tuple(p[0] for p in pairs)
    tgt = [p[1] for p in pairs]
    if rng.random() < 0.5:
        tgt.reverse()
    return src, tuple(tgt)


def make_domains(seed: int = 7, n_domains: int = 2, n_terms: int = N_TERMS) -> list[Grammar]:
    rng = random.Random(seed)
    words = _WordMaker(rng)
    connectors = [words.pair((1, 1)) for _ in range(N_CONNECTORS)]
    return [Grammar([_term(rng, words) for _ in range(n_terms)], connectors) for _ in range(n_domains)]


def sample_pairs(
    grammar: Grammar, n: int, seed: int, exclude: set[str] | None = None
) -> list[tuple[str, str]]:
    """``n`` sampled pairs whose sources are distinct and not in ``exclude``."""
    rng = random.Random(seed)
    seen = set(exclude or ())
    out = []
    while len(out) < n:
        src, tgt = grammar.sample(rng)
        if src in seen:
            continue
        seen.add(src)
        out.append((src, tgt))
    return out


def write_pairs(pairs: list[tuple[str, str]], stem: Path) -> tuple[Path, Path]:
    src_path, tgt_path = stem.with_suffix(".src"), stem.with_suffix(".tgt")
    src_path.write_text("".join(s + "\n" for s, _ in pairs), encoding="utf-8")
    tgt_path.write_text("".join(t + "\n" for _, t in pairs), encoding="utf-8")
    return src_path, tgt_path


def two_domain_splits(
    seed: int = 7, n_train: int = 2000, n_dev: int = 200, n_test: int = 200
) -> dict[str, list[tuple[str, str]]]:
    """Domain-A training data and disjoint domain-B reference/dev/test splits."""
    dom_a, dom_b = make_domains(seed)
    train_a = sample_pairs(dom_a, n_train, seed + 1)
    ref_b = sample_pairs(dom_b, n_train, seed + 2)
    used = {s for s, _ in ref_b}
    dev_b = sample_pairs(dom_b, n_dev, seed + 3, used)
    used |= {s for s, _ in dev_b}
    test_b = sample_pairs(dom_b, n_test, seed + 4, used)
    return {"train_a": train_a, "ref_b": ref_b, "dev_b": dev_b, "test_b": test_b}


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description="write a synthetic two-domain fixture")
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--dev", type=int, default=200)
    ap.add_argument("--test", type=int, default=200)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, pairs in two_domain_splits(args.seed, args.train, args.dev, args.test).items():
        write_pairs(pairs, args.out / name)


if __name__ == "__main__":
    main()
