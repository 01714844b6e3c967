"""Command line front end.

Exit status is 0 on success, 1 for configuration errors (bad flags or
parameter values) and 2 for data errors (unreadable or malformed input).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, CtrError, DataError
from .evaluation import EvaluationKey, build_outcome, score
from .linguistic import KINDS, build_ld, read_corpus, write_corpus
from .orthographic import (
    DEFAULT_ERROR_TYPES,
    ErrorTypeSet,
    KeyboardMap,
    OdSet,
    TrainingConfig,
    build_od,
    write_vocabulary,
)
from .pipeline import ExperimentConfig, run_experiment, run_recognize
from .synth import SyntheticErrorSpec, generate_corpus, synthesize_corpus
from .tokenpass import BeamConfig

EXIT_CONFIG = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _model_flags(p, ld=True):
    p.add_argument("--corpus", type=Path, help="tagged training corpus (token<TAB>class per line)")
    p.add_argument("--vocab", type=Path, help="lexicon file adding entries to the vocabulary")
    p.add_argument("--keyboard", type=Path, help="keyboard neighbour file (default: qwerty)")
    p.add_argument("--bw-iters", type=int, default=10, help="Baum-Welch iterations per word model")
    p.add_argument("--clean-weight", type=int, default=5, help="copies of the clean word in its training set")
    p.add_argument("--delta", type=float, default=1e-3, help="additive smoothing constant")
    p.add_argument(
        "--error-types",
        default=",".join(DEFAULT_ERROR_TYPES.enabled()),
        help="comma-separated OD error types",
    )
    if ld:
        p.add_argument("--ld", choices=KINDS, default="baseline", help="linguistic decoder kind")
        p.add_argument("--classes", type=Path, help="class inventory (biclass only)")
    p.add_argument("--model-dir", type=Path, help="directory holding od/ and ld/ models")


def _beam(p):
    p.add_argument("--beam", default="inf", help="beam width in cost units, or inf")


def _format(p):
    p.add_argument("--format", choices=("table", "tsv", "json"), default="table")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctrtok", description="Connected text recognition with layered HMMs.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-od", help="train one word model per vocabulary entry")
    _model_flags(p, ld=False)

    p = sub.add_parser("build-ld", help="estimate a linguistic decoder")
    _model_flags(p)

    p = sub.add_parser("recognize", help="normalize a file of utterances, one per line")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--pairs", type=Path, help="also write original<TAB>normalized pairs here")
    _model_flags(p)
    _beam(p)

    p = sub.add_parser("evaluate", help="score normalized output against a key")
    p.add_argument("original", type=Path, help="input utterances, one per line")
    p.add_argument("normalized", type=Path, help="system output, line-parallel to the input")
    p.add_argument("key", type=Path, help="key file, original<TAB>corrected")
    _format(p)

    p = sub.add_parser("experiment", help="k-fold cross-validated experiment")
    _model_flags(p)
    _beam(p)
    _format(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noisy", type=Path, help="noisy utterances, line-parallel to the corpus")
    p.add_argument("--key", type=Path, help="key for --noisy")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("synth", help="write a synthetic noisy corpus and its key")
    p.add_argument("corpus", type=Path, nargs="?", help="clean tagged corpus (default: generate one)")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dialogues", type=int, default=20)
    p.add_argument("--utterances", type=int, default=15, help="utterances per generated dialogue")
    defaults = SyntheticErrorSpec()
    for name in ("substitution", "deletion", "space_insertion", "run_on"):
        p.add_argument("--" + name.replace("_", "-"), type=float, default=getattr(defaults, name))
    p.add_argument("--keyboard", type=Path)
    return parser


def _config(args, **extra) -> ExperimentConfig:
    training = TrainingConfig(
        bw_iterations=args.bw_iters, smoothing_delta=args.delta, clean_weight=args.clean_weight
    )
    return ExperimentConfig(
        corpus=args.corpus,
        vocabulary=args.vocab,
        ld_kind=getattr(args, "ld", "baseline"),
        classes=getattr(args, "classes", None),
        training=training,
        error_types=ErrorTypeSet.parse(args.error_types.split(",")),
        keyboard=args.keyboard,
        delta=args.delta,
        beam=BeamConfig.parse(getattr(args, "beam", None)),
        model_dir=args.model_dir,
        **extra,
    )


def _emit_report(report, fmt: str) -> str:
    return {"table": report.to_table, "tsv": report.to_tsv, "json": report.to_json}[fmt]()


def _cmd_build_od(args):
    if args.model_dir is None:
        raise ConfigError("--model-dir is required")
    cfg = _config(args)
    vocab = cfg.derive_vocabulary()
    od = build_od(vocab, cfg.error_types, cfg.load_keyboard(), cfg.training)
    od.save(args.model_dir / "od")
    write_vocabulary(vocab, args.model_dir / "vocabulary.txt")
    print(f"built {len(od)} word models in {args.model_dir / 'od'}")


def _cmd_build_ld(args):
    if args.model_dir is None:
        raise ConfigError("--model-dir is required")
    cfg = _config(args)
    od_dir = args.model_dir / "od"
    vocab = OdSet.load(od_dir).vocabulary if (od_dir / "manifest.tsv").exists() else cfg.derive_vocabulary()
    corpus = cfg.load_corpus() if cfg.corpus is not None else None
    ld = build_ld(cfg.ld_kind, corpus, vocab, cfg.delta, cfg.load_inventory())
    ld.save(args.model_dir / "ld")
    print(f"built {ld.kind} decoder with {len(ld.hmm)} state(s) in {args.model_dir / 'ld'}")


def _cmd_recognize(args):
    cfg = _config(args)
    n = run_recognize(cfg, args.input, args.output, args.pairs)
    print(f"processed {n} utterance(s)")


def _cmd_evaluate(args):
    originals = args.original.read_text(encoding="utf-8").splitlines()
    outputs = args.normalized.read_text(encoding="utf-8").splitlines()
    if len(originals) != len(outputs):
        raise DataError(f"{len(originals)} input lines but {len(outputs)} output lines")
    key = EvaluationKey.read(args.key)
    report = score(build_outcome(zip(originals, outputs), key), key, args.normalized.name)
    sys.stdout.write(_emit_report(report, args.format))


def _cmd_experiment(args):
    cfg = _config(args, folds=args.folds, seed=args.seed, noisy=args.noisy, key=args.key, workers=args.workers)
    result = run_experiment(cfg)
    if args.format == "json":
        payload = {
            "key_counts": result.key_counts,
            "folds": [json.loads(r.to_json()) for r in result.folds],
            "pooled": json.loads(result.pooled.to_json()),
        }
        print(json.dumps(payload, indent=2))
    else:
        for r in result.folds + [result.pooled]:
            sys.stdout.write(_emit_report(r, args.format) + "\n")


def _cmd_synth(args):
    spec = SyntheticErrorSpec(
        args.substitution, args.deletion, args.space_insertion, args.run_on, seed=args.seed
    )
    corpus = read_corpus(args.corpus) if args.corpus else generate_corpus(args.dialogues, args.utterances, args.seed)
    keyboard = KeyboardMap.read(args.keyboard) if args.keyboard else None
    synth = synthesize_corpus(corpus, spec, keyboard)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if not args.corpus:
        write_corpus(corpus, out / "corpus.tsv")
    (out / "noisy.txt").write_text("".join(u + "\n" for u in synth.noisy_lines), encoding="utf-8")
    synth.key.write(out / "key.tsv")
    counts = synth.category_counts()
    print("\t".join(f"{k}={v}" for k, v in counts.items()))


COMMANDS = {
    "build-od": _cmd_build_od,
    "build-ld": _cmd_build_ld,
    "recognize": _cmd_recognize,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"ctrtok: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CtrError, OSError) as exc:
        print(f"ctrtok: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
