"""Subcommand front door: ingest -> dataset -> train -> export -> eval (+ grid).

Stages communicate through files so expensive steps can be reused across
experiment cells. Every run writes a manifest next to its main output.
Exit codes: 0 success, 2 input error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .corpus import build_dictionary, count_ngrams, read_ngram_db, write_dictionary, write_ngram_db
from .dataset import (
    filter_ngrams,
    read_dataset,
    read_vocabulary,
    select_vocabulary,
    split_dataset,
    vocabulary_hash,
    write_dataset,
    write_vocabulary,
)
from .embeddings import (
    export_embeddings,
    read_embeddings_text,
    write_embeddings_binary,
    write_embeddings_text,
)
from .evaluation import (
    DEFAULT_CLASSES_FILE,
    DEFAULT_PAIRS_FILE,
    load_equivalence_pairs,
    load_gold_classes,
    emit_report,
    format_report_table,
    run_standard_suite,
)
from .manifest import build_manifest, file_sha256, write_manifest
from .model import ModelHyper, load_checkpoint
from .training import (
    EpochLog,
    NonFiniteGradientError,
    TrainConfig,
    TrainingDiverged,
    timing_report,
    train,
    write_run_log,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIVERGED = 3

PAPER_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


class InputError(Exception):
    pass


def _read_corpus_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise InputError(f"corpus file not readable: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"corpus file not readable: {path} ({exc})") from exc
    return [line for line in text.splitlines() if line.strip()]


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus_path = Path(args.corpus)
    lines = _read_corpus_lines(corpus_path)
    if not lines:
        print(f"warning: corpus {corpus_path} is empty", file=sys.stderr)
    db = count_ngrams(lines, workers=args.threads)
    dictionary = build_dictionary(db)
    db_path = Path(args.out_db)
    dict_path = Path(args.out_dict)
    write_ngram_db(db, db_path)
    write_dictionary(dictionary, dict_path)
    manifest = build_manifest(
        "ingest",
        {"threads": args.threads, "out_db": str(db_path), "out_dict": str(dict_path)},
        {"corpus": corpus_path},
        args.deterministic,
    )
    write_manifest(manifest, db_path.with_suffix(db_path.suffix + ".manifest.json"))
    print(f"tweets: {db.total_tweets}")
    print(f"tokens: {db.total_tokens}")
    print(f"distinct 5-grams: {len(db.records)}")
    print(f"dictionary entries: {len(dictionary)}")
    return EXIT_OK


def cmd_dataset(args: argparse.Namespace) -> int:
    db_path = Path(args.db)
    if not db_path.is_file():
        raise InputError(f"5-gram database not readable: {db_path}")
    db = read_ngram_db(db_path)
    dictionary = build_dictionary(db)
    try:
        vocab = select_vocabulary(dictionary, args.vocab_size)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    tuples = filter_ngrams(db, vocab, include_boundary=args.include_boundary)
    if not tuples:
        raise InputError(
            f"no 5-grams qualify for vocabulary size {args.vocab_size}; "
            "try a larger vocabulary or --include-boundary"
        )
    split = split_dataset(tuples, validation_ratio=args.validation_ratio,
                          fraction=args.fraction, seed=args.seed)
    out_path = Path(args.out)
    vocab_path = out_path.with_suffix(out_path.suffix + ".vocab.tsv")
    write_dataset(split, vocab, out_path)
    write_vocabulary(vocab, vocab_path)
    manifest = build_manifest(
        "dataset",
        {
            "vocab_size": args.vocab_size,
            "fraction": args.fraction,
            "validation_ratio": args.validation_ratio,
            "seed": args.seed,
            "include_boundary": args.include_boundary,
            "out": str(out_path),
        },
        {"db": db_path},
        args.deterministic,
    )
    write_manifest(manifest, out_path.with_suffix(out_path.suffix + ".manifest.json"))
    print(f"qualifying 5-grams: {len(tuples)}")
    print(f"train tuples: {len(split.train)}")
    print(f"validation tuples: {len(split.validation)}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    dataset_path = Path(args.dataset)
    if not dataset_path.is_file():
        raise InputError(f"dataset not readable: {dataset_path}")
    split, meta = read_dataset(dataset_path)
    hyper = ModelHyper(
        vocab_size=meta["vocab_size"],
        d_in=args.emb_dim,
        d_ctx=args.ctx_dim,
        sigmoid_logits=args.sigmoid_logits,
    )
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        deterministic=args.deterministic,
    )
    checkpoint_path = Path(args.out_checkpoint)
    log_path = Path(args.out_log)
    logs: list[EpochLog] = []

    def live(entry: EpochLog) -> None:
        print(f"{entry.epoch}\t{entry.train_loss:.6f}"
              f"\t{entry.validation_loss:.6f}\t{entry.wall_seconds:.3f}")
        logs.append(entry)
        write_run_log(logs, log_path)

    manifest = build_manifest(
        "train",
        {
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "beta1": cfg.beta1,
            "beta2": cfg.beta2,
            "epsilon": cfg.epsilon,
            "seed": cfg.seed,
            "emb_dim": hyper.d_in,
            "ctx_dim": hyper.d_ctx,
            "sigmoid_logits": hyper.sigmoid_logits,
            "vocab_size": hyper.vocab_size,
            "out_checkpoint": str(checkpoint_path),
        },
        {"dataset": dataset_path},
        args.deterministic,
    )
    write_manifest(manifest, checkpoint_path.with_suffix(checkpoint_path.suffix + ".manifest.json"))
    train(split, hyper, cfg, checkpoint_path=checkpoint_path,
          vocab_hash=meta["vocab_hash"], on_epoch=live)
    summary = timing_report(logs)
    print(f"avg secs/epoch: {summary.avg_seconds_per_epoch:.3f}")
    print(f"total secs: {summary.total_seconds:.3f}")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    checkpoint_path = Path(args.checkpoint)
    vocab_path = Path(args.vocab)
    for path in (checkpoint_path, vocab_path):
        if not path.is_file():
            raise InputError(f"input not readable: {path}")
    params, header = load_checkpoint(checkpoint_path)
    vocab = read_vocabulary(vocab_path)
    if header.get("vocab_hash") and header["vocab_hash"] != vocabulary_hash(vocab):
        raise InputError(
            f"vocabulary/checkpoint mismatch: {vocab_path} does not hash to "
            f"the vocabulary this checkpoint was trained on"
        )
    table = export_embeddings(params, vocab, manifest_hash=file_sha256(checkpoint_path),
                              source=args.source)
    out_path = Path(args.out)
    write_embeddings_text(table, out_path)
    write_embeddings_binary(table, out_path.with_suffix(out_path.suffix + ".bin"))
    manifest = build_manifest(
        "export",
        {"source": args.source, "out": str(out_path)},
        {"checkpoint": checkpoint_path, "vocab": vocab_path},
        args.deterministic,
    )
    write_manifest(manifest, out_path.with_suffix(out_path.suffix + ".manifest.json"))
    print(f"exported {len(table.words)} x {table.dim} embeddings")
    return EXIT_OK


def _parse_thresholds(text: str) -> list[float]:
    values = [float(x) for x in text.split(",") if x]
    for value in values:
        if not 0.0 < value < 1.0:
            raise InputError(f"threshold out of range (0, 1): {value}")
    return values


def cmd_eval(args: argparse.Namespace) -> int:
    emb_path = Path(args.embeddings)
    classes_path = Path(args.classes)
    pairs_path = Path(args.pairs)
    for path in (emb_path, classes_path, pairs_path):
        if not path.is_file():
            raise InputError(f"input not readable: {path}")
    table = read_embeddings_text(emb_path)
    classes = load_gold_classes(classes_path)
    pairs = load_equivalence_pairs(pairs_path)
    reports = run_standard_suite(
        table, classes, pairs,
        membership_thresholds=_parse_thresholds(args.membership_thresholds),
        distinction_thresholds=_parse_thresholds(args.distinction_thresholds),
        equivalence_thresholds=_parse_thresholds(args.equivalence_thresholds),
    )
    manifest = build_manifest(
        "eval",
        {
            "membership_thresholds": args.membership_thresholds,
            "distinction_thresholds": args.distinction_thresholds,
            "equivalence_thresholds": args.equivalence_thresholds,
            "out": str(args.out),
        },
        {"embeddings": emb_path, "classes": classes_path, "pairs": pairs_path},
        args.deterministic,
    )
    out_json = Path(args.out)
    out_text = out_json.with_suffix(".txt")
    emit_report(reports, manifest, out_json, out_text)
    write_manifest(manifest, out_json.with_suffix(out_json.suffix + ".manifest.json"))
    print(format_report_table(reports), end="")
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    corpus_path = Path(args.corpus)
    lines = _read_corpus_lines(corpus_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab_sizes = [int(x) for x in args.vocab_sizes.split(",") if x]
    fractions = [float(x) for x in args.fractions.split(",") if x]
    for fraction in fractions:
        if fraction not in PAPER_FRACTIONS:
            raise InputError(f"fraction must be one of {PAPER_FRACTIONS}, got {fraction}")

    db = count_ngrams(lines, workers=args.threads)
    dictionary = build_dictionary(db)
    db_path = out_dir / "ngrams.tsv"
    write_ngram_db(db, db_path)
    write_dictionary(dictionary, out_dir / "dictionary.tsv")

    summary_rows: list[tuple] = []
    for vocab_size in vocab_sizes:
        try:
            vocab = select_vocabulary(dictionary, vocab_size)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        tuples = filter_ngrams(db, vocab, include_boundary=args.include_boundary)
        if not tuples:
            raise InputError(f"no 5-grams qualify at vocabulary size {vocab_size}")
        for fraction in fractions:
            cell = out_dir / f"v{vocab_size}_f{int(fraction * 100):03d}"
            cell.mkdir(exist_ok=True)
            split = split_dataset(tuples, validation_ratio=args.validation_ratio,
                                  fraction=fraction, seed=args.seed)
            write_dataset(split, vocab, cell / "dataset.tsv")
            write_vocabulary(vocab, cell / "vocab.tsv")
            hyper = ModelHyper(vocab_size=vocab_size, d_in=args.emb_dim,
                               d_ctx=args.ctx_dim, sigmoid_logits=args.sigmoid_logits)
            cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                              learning_rate=args.learning_rate, seed=args.seed,
                              deterministic=args.deterministic)
            params, logs = train(split, hyper, cfg,
                                 checkpoint_path=cell / "model.ckpt",
                                 vocab_hash=vocabulary_hash(vocab))
            write_run_log(logs, cell / "run_log.tsv")
            table = export_embeddings(params, vocab,
                                      manifest_hash=file_sha256(cell / "model.ckpt"))
            write_embeddings_text(table, cell / "embeddings.txt")
            write_embeddings_binary(table, cell / "embeddings.txt.bin")
            classes = load_gold_classes(args.classes)
            pairs = load_equivalence_pairs(args.pairs)
            reports = run_standard_suite(table, classes, pairs)
            cell_manifest = build_manifest(
                "grid-cell",
                {
                    "vocab_size": vocab_size,
                    "fraction": fraction,
                    "epochs": cfg.epochs,
                    "batch_size": cfg.batch_size,
                    "learning_rate": cfg.learning_rate,
                    "seed": cfg.seed,
                    "emb_dim": hyper.d_in,
                    "ctx_dim": hyper.d_ctx,
                },
                {"corpus": corpus_path},
                args.deterministic,
            )
            emit_report(reports, cell_manifest, cell / "report.json", cell / "report.txt")
            write_manifest(cell_manifest, cell / "manifest.json")
            summary = timing_report(logs)
            summary_rows.append((
                vocab_size, fraction, len(split.train),
                summary.avg_seconds_per_epoch,
                logs[-1].train_loss, logs[-1].validation_loss,
            ))
    summary_path = out_dir / "summary.tsv"
    with summary_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("vocab_size\tfraction\ttrain_tuples\tavg_secs_epoch\ttrain_loss\tval_loss\n")
        for row in summary_rows:
            fh.write(f"{row[0]}\t{row[1]}\t{row[2]}\t{row[3]:.3f}\t{row[4]:.6f}\t{row[5]:.6f}\n")
    grid_manifest = build_manifest(
        "grid",
        {
            "vocab_sizes": args.vocab_sizes,
            "fractions": args.fractions,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "learning_rate": args.learning_rate,
            "seed": args.seed,
            "out_dir": str(out_dir),
        },
        {"corpus": corpus_path},
        args.deterministic,
    )
    write_manifest(grid_manifest, out_dir / "grid.manifest.json")
    print(summary_path.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=13)
    parser.add_argument("--deterministic", action="store_true",
                        help="zero timestamps/timings so outputs are byte-reproducible")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for 5-gram counting")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--emb-dim", type=int, default=64,
                        help="input word embedding width")
    parser.add_argument("--ctx-dim", type=int, default=64,
                        help="context layer width (= exported embedding width)")
    parser.add_argument("--sigmoid-logits", action="store_true",
                        help="squash the output projection through a sigmoid before softmax")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--learning-rate", type=float, default=0.001)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweetembed",
        description="Train and evaluate word embeddings from a microblog corpus",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="corpus file -> 5-gram database + dictionary")
    p.add_argument("corpus")
    p.add_argument("--out-db", required=True)
    p.add_argument("--out-dict", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("dataset", help="5-gram database -> filtered train/validation tuples")
    p.add_argument("db")
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--fraction", type=float, default=1.0, choices=PAPER_FRACTIONS)
    p.add_argument("--validation-ratio", type=float, default=0.1)
    p.add_argument("--include-boundary", action="store_true",
                   help="admit 5-grams whose context includes boundary tokens")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="dataset file -> checkpoint + run log")
    p.add_argument("dataset")
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-log", required=True)
    _add_train_flags(p)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export", help="checkpoint + vocab -> text embeddings")
    p.add_argument("checkpoint")
    p.add_argument("--vocab", required=True)
    p.add_argument("--source", choices=("output", "input"), default="output")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="embeddings + gold data -> intrinsic test report")
    p.add_argument("embeddings")
    p.add_argument("--classes", default=str(DEFAULT_CLASSES_FILE))
    p.add_argument("--pairs", default=str(DEFAULT_PAIRS_FILE))
    p.add_argument("--membership-thresholds", default="0.70,0.80")
    p.add_argument("--distinction-thresholds", default="0.70,0.80")
    p.add_argument("--equivalence-thresholds", default="0.85,0.95")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="run the vocab-size x fraction experiment matrix")
    p.add_argument("corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--vocab-sizes", required=True, help="comma-separated sizes")
    p.add_argument("--fractions", default="0.25,0.5,0.75,1.0")
    p.add_argument("--validation-ratio", type=float, default=0.1)
    p.add_argument("--include-boundary", action="store_true")
    p.add_argument("--classes", default=str(DEFAULT_CLASSES_FILE))
    p.add_argument("--pairs", default=str(DEFAULT_PAIRS_FILE))
    _add_train_flags(p)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TrainingDiverged, NonFiniteGradientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def run() -> None:
    sys.exit(main())
