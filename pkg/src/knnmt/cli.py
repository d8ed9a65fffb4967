"""Command-line entry point: ``knnmt <subcommand> [flags]``.

Every run echoes its fully resolved command line to stderr as
``# resolved: knnmt ...``; re-running that line reproduces the output.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import bench as bench_mod
from .bleu import EvalReport, corpus_bleu
from .bm25 import DEFAULT_DEPTH, Bm25Index, index_sources
from .corpus import Vocab, build_vocab_from_files, detokenize, load_parallel, read_lines, tokenize
from .datastore import DEFAULT_K
from .decode import sentence_store, translate, translate_bare
from .errors import KnnMTError
from .interp import DistanceAware, KnnConfig, parse_policy
from .model import DEFAULT_DIM, ToyModel, fit_toy
from .trainer import TrainConfig, collect_examples, fit, save_policy

log = logging.getLogger("knnmt")

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _add_model_flags(p: argparse.ArgumentParser, need_index: bool = True) -> None:
    p.add_argument("--model", required=True, help="toy model file written by fit-toy")
    p.add_argument("--vocab", required=True, help="vocabulary file written by fit-toy")
    p.add_argument("--index", required=need_index, help="BM25 index over the reference sources")
    p.add_argument("--ref", nargs=2, metavar=("SRC", "TGT"), required=need_index,
                   help="reference corpus the index was built from")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH, help="sentences retrieved per input")


def _add_knn_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--temperature", type=float, default=None,
                   help="kNN softmax temperature (default: the sk:<T> value, else 100)")
    p.add_argument("--lambda", dest="lam", default="sk:100",
                   help="fixed:<v> | sk:<T> | trained:<policy file>")
    p.add_argument("--literal-eq3", action="store_true",
                   help="weight the model distribution by lambda instead of the kNN one")
    p.add_argument("--squared-l2", action="store_true")


def _add_decode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-len", type=int, default=0, help="0 = 2 * source length + 10")
    p.add_argument("--length-norm", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="knnmt", description="sentence-adaptive kNN-MT toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fit-toy", help="build a vocabulary and fit the count-based toy model")
    p.add_argument("--train", nargs=2, metavar=("SRC", "TGT"), required=True)
    p.add_argument("--extra", nargs=2, metavar=("SRC", "TGT"), action="append", default=[],
                   help="corpus added to the vocabulary only (repeatable)")
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-out", required=True)

    p = sub.add_parser("index", help="build a BM25 index over source sentences")
    p.add_argument("--src", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)

    p = sub.add_parser("build-store", help="dump the tiny datastore for one input sentence")
    p.add_argument("--src", required=True)
    p.add_argument("--line", type=int, default=0, help="0-based line of --src")
    _add_model_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-lambda", help="fit the trainable interpolation weight on a dev set")
    p.add_argument("--dev", nargs=2, metavar=("SRC", "TGT"), required=True)
    _add_model_flags(p)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--temperature", type=float, default=100.0)
    p.add_argument("--squared-l2", action="store_true")
    p.add_argument("--weighted", action="store_true", help="class-weighted binary cross-entropy")
    p.add_argument("--online", action="store_true", help="one update per example")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("translate", help="decode source sentences (bare model when --index is omitted)")
    p.add_argument("--src", required=True)
    _add_model_flags(p, need_index=False)
    _add_knn_flags(p)
    _add_decode_flags(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-")

    p = sub.add_parser("eval", help="corpus BLEU of hypotheses against references")
    p.add_argument("--hyp", required=True)
    p.add_argument("--refs", required=True)
    p.add_argument("--smooth", choices=["none", "add1"], default="none")
    p.add_argument("--tsv", action="store_true")

    p = sub.add_parser("bench", help="tokens/sec of bare vs kNN decoding")
    p.add_argument("--src", required=True)
    _add_model_flags(p)
    _add_knn_flags(p)
    _add_decode_flags(p)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--limit", type=int, default=0, help="use only the first N sentences (0 = all)")
    p.add_argument("--tsv", action="store_true")
    return ap


def resolved_argv(parser: argparse.ArgumentParser, args: argparse.Namespace) -> list[str]:
    """Reconstruct a complete command line, every default made explicit."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    out = [args.command]
    for action in sub.choices[args.command]._actions:
        if not action.option_strings or action.dest == "help":
            continue
        flag = action.option_strings[-1]
        value = getattr(args, action.dest)
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                out.append(flag)
        elif value is None:
            continue
        elif isinstance(action, argparse._AppendAction):
            for item in value:
                out += [flag, *map(str, item)]
        elif isinstance(value, (list, tuple)):
            out += [flag, *map(str, value)]
        else:
            out += [flag, str(value)]
    return out


def _knn_config(args) -> KnnConfig:
    policy = parse_policy(args.lam)
    temperature = args.temperature
    if temperature is None:
        temperature = policy.temperature if isinstance(policy, DistanceAware) else 100.0
        args.temperature = temperature
    return KnnConfig(args.k, temperature, policy, args.literal_eq3, args.squared_l2)


def _load(args):
    vocab = Vocab.load(args.vocab)
    model = ToyModel.load(args.model, vocab)
    index = ref = None
    if args.index:
        if not args.ref:
            raise KnnMTError("--index requires --ref")
        index = Bm25Index.load(args.index)
        ref = load_parallel(*args.ref, vocab=vocab)
        if index.doc_count != len(ref):
            raise KnnMTError(f"index covers {index.doc_count} sentences, reference has {len(ref)}")
    return vocab, model, index, ref


def _sources(path: str, vocab: Vocab) -> list[tuple[int, ...]]:
    return [vocab.encode(tokenize(line)) for line in read_lines(path)]


def _write_lines(lines: Sequence[str], dest: str) -> None:
    text = "".join(line + "\n" for line in lines)
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def cmd_fit_toy(args) -> None:
    vocab = build_vocab_from_files([tuple(args.train), *map(tuple, args.extra)])
    corpus = load_parallel(*args.train, vocab=vocab)
    model = fit_toy(corpus, args.seed, args.dim)
    model.save(args.out)
    vocab.save(args.vocab_out)
    print(f"fit-toy: {len(corpus)} pairs, vocab {len(vocab)}, dim {args.dim}")


def cmd_index(args) -> None:
    vocab = Vocab.load(args.vocab)
    index = index_sources(_sources(args.src, vocab), args.k1, args.b)
    index.save(args.out)
    print(f"index: {index.doc_count} sentences, {len(index.postings)} terms, "
          f"avg length {index.avg_doc_length:.2f}")


def cmd_build_store(args) -> None:
    vocab, model, index, ref = _load(args)
    sources = _sources(args.src, vocab)
    if not 0 <= args.line < len(sources):
        raise KnnMTError(f"--line {args.line} outside {args.src} ({len(sources)} lines)")
    store = sentence_store(model, index, ref, sources[args.line], args.depth)
    store.dump(args.out)
    print(f"build-store: {len(store)} entries")


def cmd_train_lambda(args) -> None:
    vocab, model, index, ref = _load(args)
    dev = load_parallel(*args.dev, vocab=vocab)
    cfg = KnnConfig(args.k, args.temperature, DistanceAware(args.temperature), squared_l2=args.squared_l2)
    examples = collect_examples(model, index, dev, ref, cfg, args.depth, args.workers)
    tcfg = TrainConfig(args.lr, args.epochs, args.tol, args.weighted, args.online, seed=args.seed)
    trained = fit(examples, tcfg)
    save_policy(trained, args.out)
    print(f"train-lambda: {len(examples)} examples, positive fraction {trained.pos_fraction:.4f}")
    print(f"W={trained.weight!r} B={trained.bias!r} loss={trained.train_loss:.6f} epochs={trained.epochs_run}")


def _decode_all(args, sources) -> list[list[int]]:
    vocab, model, index, ref = _load(args)
    cfg = _knn_config(args)
    max_len = args.max_len or None

    def one(src):
        if not src:
            return []
        if index is None:
            return translate_bare(model, src, args.beam, max_len, args.length_norm)
        return translate(model, index, ref, src, cfg, args.beam, max_len, args.depth, args.length_norm)

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            return list(pool.map(one, sources))
    return [one(s) for s in sources]


def cmd_translate(args) -> None:
    vocab = Vocab.load(args.vocab)
    outputs = _decode_all(args, _sources(args.src, vocab))
    _write_lines([detokenize(vocab.decode(o)) for o in outputs], args.out)


def cmd_eval(args) -> None:
    hyps = [tokenize(line) for line in read_lines(args.hyp)]
    refs = [tokenize(line) for line in read_lines(args.refs)]
    report = corpus_bleu(hyps, refs, args.smooth)
    print(report.table())
    if args.tsv:
        print(EvalReport.TSV_HEADER)
        print(report.to_tsv())


def cmd_bench(args) -> None:
    vocab, model, index, ref = _load(args)
    cfg = _knn_config(args)
    sources = [s for s in _sources(args.src, vocab) if s]
    if args.limit:
        sources = sources[: args.limit]
    report = bench_mod.benchmark(model, index, ref, sources, cfg, args.beam, args.repeats,
                                 args.depth, args.max_len or None)
    print(report.table())
    if args.tsv:
        print(bench_mod.BenchReport.TSV_HEADER)
        print(report.to_tsv())


COMMANDS = {
    "fit-toy": cmd_fit_toy,
    "index": cmd_index,
    "build-store": cmd_build_store,
    "train-lambda": cmd_train_lambda,
    "translate": cmd_translate,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "lam"):
            _knn_config(args)
        print("# resolved: " + shlex.join(["knnmt", *resolved_argv(parser, args)]), file=sys.stderr)
        COMMANDS[args.command](args)
    except (KnnMTError, OSError, ValueError) as e:
        print(f"knnmt {args.command}: error: {e}", file=sys.stderr)
        return DATA_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
