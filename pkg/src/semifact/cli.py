"""Command line interface.

Subcommands: augment, gridsearch, train, eval, overlap, plot, synth.
Exit code 0 on success; failures print a stage-named diagnostic and exit 1.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from .corpus import LabelScheme, SchemeKind, load_stopwords, read_conll, vocab_overlap
from .errors import ConfigError, SemifactError, StageError
from .pipeline import (
    RunConfig,
    config_from_mapping,
    grid_search_ratios,
    load_config_file,
    load_grid_surface,
    run_augment,
    run_eval,
)
from .plots import load_shot_rows, render_ratio_curves, render_shot_curves
from .synth import build_synthetic_suite
from .tagger import evaluate, load_model, save_model, train


def _build_config(args: argparse.Namespace) -> RunConfig:
    # config-file paths resolve against the file, overrides against the cwd
    merged: dict[str, str] = {}
    if args.config:
        base = Path(args.config).parent
        for key, value in load_config_file(args.config).items():
            merged[key] = str(base / value) if _is_path_key(key) else value
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        merged[key.strip()] = value.strip()
    if args.seed is not None:
        merged["seed"] = str(args.seed)
    if args.out_dir is not None:
        merged["out_dir"] = str(args.out_dir)
    return config_from_mapping(merged, ".")


def _is_path_key(key: str) -> bool:
    return key in ("train", "dev", "test", "stopwords", "entity_base", "out_dir") or key.startswith(
        "ood."
    )


def _parse_ratio_list(text: str) -> list[int]:
    """Accept "1-8" ranges or "0,2,4" lists."""
    text = text.strip()
    if "-" in text and "," not in text:
        lo, _, hi = text.partition("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def _scheme_from_args(args: argparse.Namespace) -> LabelScheme:
    types = tuple(t.strip() for t in args.entity_types.split(",") if t.strip())
    return LabelScheme(SchemeKind(args.scheme), types)


def _cmd_augment(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    _, manifest = run_augment(cfg)
    pools = manifest["pools"]
    print(
        f"augmented {manifest['few_shot']['sentences']} few-shot sentences -> "
        f"{manifest['mixed_sentences']} mixed "
        f"(entity {pools['entity']['kept']}/{pools['entity']['generated']}, "
        f"context {pools['context']['kept']}/{pools['context']['generated']} kept)"
    )
    print(f"artifacts in {cfg.out_dir}")
    return 0


def _cmd_gridsearch(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    result = grid_search_ratios(
        cfg,
        entity_ratios=_parse_ratio_list(args.entity_ratios),
        context_ratios=_parse_ratio_list(args.context_ratios),
        jobs=args.jobs,
    )
    e, c = result.best
    print(f"best ratios: entity 1:{e}, context 1:{c} (dev micro-F1 {result.surface[result.best]:.4f})")
    if result.failures:
        print(f"{len(result.failures)} grid point(s) failed", file=sys.stderr)
    print(f"surface in {cfg.out_dir / 'gridsearch.json'}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    scheme = _scheme_from_args(args)
    train_ds = read_conll(args.train, scheme)
    dev_ds = read_conll(args.dev, scheme) if args.dev else None
    if args.repeats > 1 and dev_ds is None:
        raise ConfigError("--repeats > 1 requires --dev to score the repeats")

    model = train(train_ds, args.epochs, args.seed)
    save_model(model, args.out)
    print(f"model saved to {args.out}")

    if dev_ds is not None:
        scores = []
        for r in range(args.repeats):
            repeat_model = model if r == 0 else train(train_ds, args.epochs, args.seed + r)
            scores.append(evaluate(repeat_model, dev_ds).micro_f1)
        mean = statistics.fmean(scores)
        stdev = statistics.stdev(scores) if len(scores) > 1 else 0.0
        print(f"dev micro-F1 over {args.repeats} repeat(s): mean {mean:.4f}, stdev {stdev:.4f}")
        report = {
            "seeds": [args.seed + r for r in range(args.repeats)],
            "dev_micro_f1": scores,
            "mean": mean,
            "stdev": stdev,
        }
        report_path = Path(args.out).with_suffix(".train_report.json")
        report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", "utf-8")
        print(f"repeat report in {report_path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    ood: dict[str, str] = {}
    for item in args.ood or []:
        name, sep, path = item.partition("=")
        if not sep:
            raise ConfigError(f"--ood expects name=path, got {item!r}")
        ood[name] = path
    cfg = RunConfig(
        out_dir=Path(args.out_dir),
        seed=0,
        test=Path(args.test) if args.test else None,
        ood=ood,
        scheme=model.scheme.scheme_kind.value,
        entity_types=model.scheme.entity_types,
    )
    reports = run_eval(cfg, model)
    for name, report in sorted(reports.items()):
        print(
            f"{name}: P {report.precision:.4f}  R {report.recall:.4f}  F1 {report.micro_f1:.4f}"
            f"  (tp {report.tp} fp {report.fp} fn {report.fn})"
        )
    print(f"reports in {cfg.out_dir}")
    return 0


def _cmd_overlap(args: argparse.Namespace) -> int:
    stopwords = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    scheme_a = _detect_or_default(args.a)
    scheme_b = _detect_or_default(args.b)
    a = read_conll(args.a, scheme_a)
    b = read_conll(args.b, scheme_b)
    ratio = vocab_overlap(a, b, args.top_n, stopwords)
    print(f"{ratio:.6f}")
    return 0


def _detect_or_default(path: str) -> LabelScheme:
    from .corpus import detect_scheme

    try:
        return detect_scheme(Path(path).read_bytes())
    except ValueError:
        return LabelScheme(SchemeKind.BIO2, ("PER", "LOC", "ORG", "MISC"))


def _cmd_plot(args: argparse.Namespace) -> int:
    if not args.surface and not args.shots:
        raise ConfigError("plot needs --surface and/or --shots")
    outputs: list[Path] = []
    if args.surface:
        surface = load_grid_surface(args.surface)
        outputs += render_ratio_curves(surface, args.out_dir)
    if args.shots:
        outputs += render_shot_curves(load_shot_rows(args.shots), args.out_dir)
    for path in outputs:
        print(path)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    paths = build_synthetic_suite(
        args.out_dir,
        seed=args.seed,
        train_sentences=args.train_sentences,
        dev_sentences=args.dev_sentences,
        test_sentences=args.test_sentences,
        target_sentences=args.target_sentences,
    )
    for role in sorted(paths):
        print(f"{role}: {paths[role]}")
    return 0


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="declarative key = value configuration file")
    parser.add_argument(
        "-o",
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a configuration key (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out-dir", help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semifact",
        description="Semi-factual data augmentation and evaluation for few-shot cross-domain NER",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_augment = sub.add_parser("augment", help="run the full augmentation pipeline")
    _add_config_args(p_augment)
    p_augment.set_defaults(func=_cmd_augment)

    p_grid = sub.add_parser("gridsearch", help="grid-search augmentation ratios on the dev set")
    _add_config_args(p_grid)
    p_grid.add_argument("--entity-ratios", default="1-8", help='grid, e.g. "1-8" or "0,4,8"')
    p_grid.add_argument("--context-ratios", default="1-5", help='grid, e.g. "1-5" or "0,3,5"')
    p_grid.add_argument("--jobs", type=int, default=1, help="parallel grid jobs")
    p_grid.set_defaults(func=_cmd_gridsearch)

    p_train = sub.add_parser("train", help="train the reference tagger on a CoNLL corpus")
    p_train.add_argument("--train", required=True)
    p_train.add_argument("--dev")
    p_train.add_argument("--out", required=True, help="model JSON path")
    p_train.add_argument("--epochs", type=int, default=5)
    p_train.add_argument("--seed", type=int, required=True)
    p_train.add_argument("--repeats", type=int, default=1, help="seeded repeats scored on --dev")
    p_train.add_argument("--scheme", default="BIO2", choices=[k.value for k in SchemeKind])
    p_train.add_argument("--entity-types", default="PER,LOC,ORG,MISC")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a model in-domain and out-of-domain")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--test")
    p_eval.add_argument("--ood", action="append", metavar="NAME=PATH", help="repeatable")
    p_eval.add_argument("--out-dir", required=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_overlap = sub.add_parser("overlap", help="vocabulary overlap between two corpora")
    p_overlap.add_argument("--a", required=True)
    p_overlap.add_argument("--b", required=True)
    p_overlap.add_argument("--top-n", type=int, default=5000)
    p_overlap.add_argument("--stopwords")
    p_overlap.set_defaults(func=_cmd_overlap)

    p_plot = sub.add_parser("plot", help="render figures from stored results")
    p_plot.add_argument("--surface", help="gridsearch.json from the gridsearch subcommand")
    p_plot.add_argument("--shots", help="delimited k_shot,variant,micro_f1 file")
    p_plot.add_argument("--out-dir", required=True)
    p_plot.set_defaults(func=_cmd_plot)

    p_synth = sub.add_parser("synth", help="generate the synthetic two-domain corpus suite")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--train-sentences", type=int, default=200)
    p_synth.add_argument("--dev-sentences", type=int, default=80)
    p_synth.add_argument("--test-sentences", type=int, default=80)
    p_synth.add_argument("--target-sentences", type=int, default=120)
    p_synth.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return 1
    except SemifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
