"""Command-line entry point: vocab -> cooccur -> train -> evaluation and export commands.

Exit codes: 0 success, 1 usage error, 2 data or format error. Metrics go to
standard output as TSV with six significant digits; progress goes to
standard error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import analogy, corpus, evaluation, hyperbolicity, hypernymy, modelio, trainer
from .errors import FormatError
from .hfunc import HFunction
from .modelio import WordVectors

log = logging.getLogger("hypglove")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _unit_float(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _h_function(text):
    try:
        return HFunction.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(args, inputs, path) -> None:
    flags = {
        k: (v.name if isinstance(v, HFunction) else v)
        for k, v in sorted(vars(args).items())
        if k not in ("func", "command")
    }
    manifest = {
        "subcommand": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _digest(p) for p in inputs if p is not None and Path(p).is_file()},
        "version": __version__,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _manifest_path(args, output):
    if args.manifest:
        return args.manifest
    if output:
        return f"{output}.manifest.json"
    return None


def _emit(fields) -> None:
    print(evaluation.summary_line(fields))


def _load_model(path):
    model = modelio.load_any(path)
    if model.words is None:
        raise FormatError(f"{path}: model carries no vocabulary; re-save it with words")
    return model


def _require_table(model, path):
    if isinstance(model, WordVectors):
        raise FormatError(f"{path}: a hyperbolic model is required for this command")
    return model


def cmd_vocab(args):
    vocab = corpus.build_vocab(args.input, args.min_count)
    corpus.save_vocab(vocab, args.output)
    _emit(["vocab", len(vocab)])
    return [args.input], args.output


def cmd_cooccur(args):
    vocab = corpus.load_vocab(args.vocab)
    m = corpus.count_cooccurrences(args.input, vocab, args.window, args.weighting, args.threads)
    corpus.save_cooc(m, args.output)
    _emit(["cooccur", m.vocab_size, m.nnz])
    return [args.input, args.vocab], args.output


def cmd_train(args):
    m = corpus.load_cooc(args.cooc)
    words = None
    if args.vocab:
        vocab = corpus.load_vocab(args.vocab)
        if len(vocab) != m.vocab_size:
            raise FormatError(f"{args.vocab}: {len(vocab)} words but co-occurrence matrix has V={m.vocab_size}")
        words = vocab.words
    init = None
    if args.init_model:
        init = modelio.load_model(args.init_model, expect_p=args.factors, expect_k=args.dim)
        if init.shape[0] != m.vocab_size:
            if init.words is None or words is None:
                raise FormatError("warm start across vocabularies needs words in the model and --vocab")
            restricted = corpus.Vocab(init.words, np.zeros(len(init.words), np.int64),
                                      {w: i for i, w in enumerate(init.words)})
            init = trainer.init_trick(init, restricted, vocab, args.seed)
    cfg = trainer.TrainConfig(
        p=args.factors, k=args.dim, h=args.h, lr=args.lr, epochs=args.epochs, optimizer=args.optimizer,
        x_max=args.x_max, alpha=args.alpha, seed=args.seed,
        mode="deterministic" if args.deterministic else "hogwild", threads=args.threads,
    )
    args.lr = cfg.lr
    result = trainer.train(m, cfg, init=init, words=words)
    modelio.save_model(result.table, args.output)
    _emit(["train", len(result.epoch_losses), result.epoch_losses[-1]])
    return [args.cooc, args.vocab, args.init_model], args.output


def cmd_eval_sim(args):
    model = _load_model(args.model)
    data = evaluation.load_pair_dataset(args.dataset, args.lowercase)
    res = evaluation.eval_similarity(data, model)
    _emit([Path(args.dataset).name, res.metric, res.value, res.n_used, res.n_dropped])
    if args.details:
        evaluation.write_jsonl(args.details, res.details)
    return [args.model, args.dataset], args.details


def cmd_eval_analogy(args):
    model = _load_model(args.model)
    data = analogy.load_analogy_dataset(args.dataset, args.lowercase)
    name = Path(args.dataset).name
    if args.cross_validate:
        cv = analogy.cross_validate_t(data, _require_table(model, args.model), seed=args.seed,
                                      metric=args.metric, use=args.use)
        for fold in range(2):
            _emit([name, f"fold{fold + 1}", "t", cv.t[fold], "accuracy", cv.test_accuracy[fold]])
        return [args.model, args.dataset], args.details
    res = analogy.eval_analogy(data, model, args.metric, args.t, args.use)
    for split in ("semantic", "syntactic", "total"):
        s = res.splits[split]
        _emit([name, split, s.accuracy, s.correct, s.total])
    _emit([name, "dropped", res.dropped])
    if args.details:
        evaluation.write_jsonl(args.details, res.details)
    return [args.model, args.dataset], args.details


def _sets(args, table):
    if args.sets == "files":
        if not (args.generic and args.specific):
            raise UsageError("--sets files needs --generic and --specific")
        return hypernymy.select_sets_from_files(args.generic, args.specific, table.word_index())
    return hypernymy.select_sets_unsupervised(table.shape[0], args.n, args.pool or table.shape[0])


def cmd_eval_hypernymy(args):
    table = _require_table(_load_model(args.model), args.model)
    sets = _sets(args, table)
    T = hypernymy.fit_isometry(table.target, sets)
    data = evaluation.load_pair_dataset(args.dataset, args.lowercase)
    if args.task == "hyperlex":
        res = evaluation.eval_hyperlex(data, table, T)
    else:
        res = evaluation.eval_wbless(data, table, T, args.holdout, args.repeats, args.seed)
    _emit([Path(args.dataset).name, args.task, res.metric, res.value, res.n_used, res.n_dropped])
    if args.details:
        evaluation.write_jsonl(args.details, res.details)
    return [args.model, args.dataset, args.generic, args.specific], args.details


def cmd_delta_hyp(args):
    m = corpus.load_cooc(args.cooc)
    source = hyperbolicity.CoocMetric(m, args.h, args.smoothing, args.top)
    est = hyperbolicity.estimate_delta(source, args.tuples, args.pairs, args.seed)
    _emit([args.h.name, est.d_avg, est.delta_avg, est.ratio, est.clamp_count])
    return [args.cooc], None


def cmd_export_gaussian(args):
    table = _require_table(_load_model(args.model), args.model)
    T = hypernymy.fit_isometry(table.target, _sets(args, table))
    g = hypernymy.to_gaussian(table.target, T)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        for n, word in enumerate(table.words):
            cols = np.stack([g.mu[n], g.sigma[n]], axis=-1).ravel()
            fh.write(word + "\t" + "\t".join(format(v, ".17g") for v in cols) + "\n")
    _emit(["export-gaussian", table.shape[0], table.shape[1]])
    return [args.model, args.generic, args.specific], args.output


def cmd_export_text(args):
    table = _require_table(_load_model(args.model), args.model)
    modelio.export_text(table, args.output)
    _emit(["export-text", table.shape[0]])
    return [args.model], args.output


def _add_set_flags(p):
    p.add_argument("--sets", choices=("unsupervised", "files"), default="unsupervised")
    p.add_argument("--n", type=_positive_int, default=5000, help="generic/specific set size (unsupervised)")
    p.add_argument("--pool", type=_positive_int, default=None, help="frequency pool (default: whole vocabulary)")
    p.add_argument("--generic", help="word-per-line generic words")
    p.add_argument("--specific", help="word-per-line specific words")


def build_parser() -> Parser:
    parser = Parser(prog="hypglove", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hypglove {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--manifest", help="run manifest path (default: <output>.manifest.json)")
        return p

    p = command("vocab", cmd_vocab, "count words")
    p.add_argument("--input", required=True)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--output", required=True)

    p = command("cooccur", cmd_cooccur, "count windowed co-occurrences")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--window", type=_positive_int, default=10)
    p.add_argument("--weighting", choices=("harmonic", "flat"), default="harmonic")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--output", required=True)

    p = command("train", cmd_train, "fit embeddings in a product of Poincare balls")
    p.add_argument("--cooc", required=True)
    p.add_argument("--vocab", help="vocabulary file; stores words in the model")
    p.add_argument("--factors", type=_positive_int, default=10)
    p.add_argument("--dim", type=_positive_int, default=2)
    p.add_argument("--h", type=_h_function, default=HFunction("cosh_pow", 2))
    p.add_argument("--lr", type=_positive_float, default=None, help="default 0.01 for cosh^K, 0.05 for square")
    p.add_argument("--epochs", type=_positive_int, default=50)
    p.add_argument("--optimizer", choices=("radagrad", "rsgd"), default="radagrad")
    p.add_argument("--x-max", type=_positive_float, default=100.0)
    p.add_argument("--alpha", type=_positive_float, default=0.75)
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--deterministic", action="store_true", help="single-threaded, bitwise reproducible")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-model", help="warm start from a model (restricted vocabularies allowed)")
    p.add_argument("--output", required=True)

    p = command("eval-sim", cmd_eval_sim, "Spearman correlation on a similarity dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--details", help="JSON-lines per-row log")

    p = command("eval-analogy", cmd_eval_analogy, "analogy accuracy per split")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--t", type=_unit_float, default=0.3)
    p.add_argument("--metric", choices=analogy.METRICS, default="poincare")
    p.add_argument("--use", choices=("w", "w+c"), default="w")
    p.add_argument("--cross-validate", action="store_true", help="2-fold selection of t over 0, 0.1, ..., 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--details", help="JSON-lines per-row log")

    p = command("eval-hypernymy", cmd_eval_hypernymy, "graded (hyperlex) or binary (wbless) entailment")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--task", choices=("hyperlex", "wbless"), default="hyperlex")
    _add_set_flags(p)
    p.add_argument("--holdout", type=_unit_float, default=0.02)
    p.add_argument("--repeats", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--details", help="JSON-lines per-row log")

    p = command("delta-hyp", cmd_delta_hyp, "sampled delta-hyperbolicity of the induced metric")
    p.add_argument("--cooc", required=True)
    p.add_argument("--h", type=_h_function, default=HFunction("cosh_pow", 2))
    p.add_argument("--tuples", type=_positive_int, default=100_000)
    p.add_argument("--pairs", type=_positive_int, default=100_000)
    p.add_argument("--smoothing", choices=hyperbolicity.SMOOTHING, default="plus_one")
    p.add_argument("--top", type=_positive_int, default=None, help="restrict to the most frequent words")
    p.add_argument("--seed", type=int, default=0)

    p = command("export-gaussian", cmd_export_gaussian, "per-word (mu, sigma) per factor as TSV")
    p.add_argument("--model", required=True)
    _add_set_flags(p)
    p.add_argument("--output", required=True)

    p = command("export-text", cmd_export_text, "text model with a sibling .context file")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        inputs, output = args.func(args)
        manifest = _manifest_path(args, output)
        if manifest:
            write_manifest(args, inputs, manifest)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hypglove: error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, ValueError, OSError, FloatingPointError) as exc:
        print(f"hypglove: error: {exc}", file=sys.stderr)
        return 2
    return 0
