"""Tokenization, vocabulary and line-aligned parallel corpora."""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidToken, LineCountMismatch

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")


def _is_punct(ch: str) -> bool:
    return ch in string.punctuation or unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and peel punctuation off word edges.

    Every leading or trailing punctuation character becomes its own token:
    ``"Hello, world"`` gives ``["hello", ",", "world"]``.
    """
    tokens: list[str] = []
    for word in text.lower().split():
        head: list[str] = []
        tail: list[str] = []
        while word and _is_punct(word[0]):
            head.append(word[0])
            word = word[1:]
        while word and _is_punct(word[-1]):
            tail.append(word[-1])
            word = word[:-1]
        tokens.extend(head)
        if word:
            tokens.append(word)
        tokens.extend(reversed(tail))
    return tokens


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


class Vocab:
    """Dense token <-> id mapping with PAD/BOS/EOS/UNK fixed at ids 0-3."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.id_to_token: list[str] = list(RESERVED)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(RESERVED)}
        for tok in tokens:
            self._add(tok)

    def _add(self, tok: str) -> int:
        idx = self.token_to_id.get(tok)
        if idx is None:
            idx = len(self.id_to_token)
            self.token_to_id[tok] = idx
            self.id_to_token.append(tok)
        return idx

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocab":
        """Assign ids in first-occurrence order over the given token sequences."""
        return cls(tok for sent in sentences for tok in sent)

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, tok: str) -> bool:
        return tok in self.token_to_id

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.id_to_token == other.id_to_token

    def encode(self, tokens: Sequence[str]) -> tuple[int, ...]:
        get = self.token_to_id.get
        return tuple(get(t, UNK) for t in tokens)

    def decode(self, ids: Sequence[int]) -> list[str]:
        n = len(self.id_to_token)
        out = []
        for i in ids:
            if not 0 <= i < n:
                raise InvalidToken(f"token id {i} outside vocabulary of size {n}")
            out.append(self.id_to_token[i])
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.id_to_token) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:4]) != RESERVED:
            raise ValueError(f"{path}: vocabulary must start with {RESERVED}")
        vocab = cls(lines[4:])
        if len(vocab) != len(lines):
            raise ValueError(f"{path}: duplicate tokens in vocabulary file")
        return vocab


@dataclass(frozen=True)
class ParallelCorpus:
    """Aligned (source ids, target ids) pairs; every target ends with EOS."""

    pairs: list[tuple[tuple[int, ...], tuple[int, ...]]]
    vocab: Vocab = field(compare=False)

    def __len__(self) -> int:
        return len(self.pairs)

    def sources(self) -> list[tuple[int, ...]]:
        return [s for s, _ in self.pairs]

    def targets(self) -> list[tuple[int, ...]]:
        return [t for _, t in self.pairs]

    def validate(self) -> None:
        n = len(self.vocab)
        for i, (src, tgt) in enumerate(self.pairs):
            if not src or not tgt:
                raise ValueError(f"pair {i}: empty side")
            if tgt[-1] != EOS:
                raise ValueError(f"pair {i}: target does not end with EOS")
            for tok in (*src, *tgt):
                if tok == PAD or not 0 <= tok < n:
                    raise InvalidToken(f"pair {i}: bad token id {tok}")


def read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def load_tokenized(source_path: str | Path, target_path: str | Path) -> list[tuple[list[str], list[str]]]:
    src_lines = read_lines(source_path)
    tgt_lines = read_lines(target_path)
    if len(src_lines) != len(tgt_lines):
        raise LineCountMismatch(
            f"{source_path} has {len(src_lines)} lines, {target_path} has {len(tgt_lines)}"
        )
    return [(tokenize(s), tokenize(t)) for s, t in zip(src_lines, tgt_lines)]


def encode_pairs(
    tokenized: Sequence[tuple[Sequence[str], Sequence[str]]], vocab: Vocab
) -> ParallelCorpus:
    pairs = []
    for i, (src, tgt) in enumerate(tokenized):
        if not src:
            raise ValueError(f"line {i + 1}: empty source sentence")
        pairs.append((vocab.encode(src), vocab.encode(tgt) + (EOS,)))
    return ParallelCorpus(pairs, vocab)


def load_parallel(
    source_path: str | Path, target_path: str | Path, vocab: Vocab | None = None
) -> ParallelCorpus:
    """Read two line-aligned files into a corpus.

    With ``vocab=None`` a fresh vocabulary is built from both sides;
    otherwise unknown tokens map to UNK.
    """
    tokenized = load_tokenized(source_path, target_path)
    if vocab is None:
        vocab = Vocab.build(sent for pair in tokenized for sent in pair)
    return encode_pairs(tokenized, vocab)


def build_vocab_from_files(file_pairs: Iterable[tuple[str | Path, str | Path]]) -> Vocab:
    """Union vocabulary over several parallel corpora, in argument order."""
    sents: list[list[str]] = []
    for src, tgt in file_pairs:
        for s, t in load_tokenized(src, tgt):
            sents.append(s)
            sents.append(t)
    return Vocab.build(sents)
