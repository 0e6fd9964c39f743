"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import yaml

from .data import DatasetRecipe, generate_synthetic, load_csv
from .engine import load_model
from .errors import DataError, DomainError, ShapeError, TrainingDivergence
from .experiment import FORMATS, SUFFIX, ExperimentConfig, compare, emit_report, prepare_for, render, run_single
from .metrics import EvalReport, evaluate
from .pipeline import prepare
from .smote import SmoteConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

log = logging.getLogger("cnnbigru")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="random seed (split seed for prepare, run seed otherwise)")
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--no-smote", action="store_true", help="skip SMOTE on the training split")
    g.add_argument("--format", choices=FORMATS, default="table")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="cnnbigru", description="CNN-BiGRU intrusion detection experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", parents=[common], help="preprocess a dataset and write train/test CSVs")
    p.add_argument("--recipe", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--test-fraction", type=float, default=0.2)

    p = sub.add_parser("train", parents=[common], help="train and evaluate one model")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--activation", required=True)
    p.add_argument("--out", type=Path, help="directory for the model and report (default: config output_dir)")

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a saved model on a prepared CSV")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--label-column", default="label")

    p = sub.add_parser("compare", parents=[common], help="compare activations on one dataset")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", type=Path, help="report file (default: stdout)")

    p = sub.add_parser("synth", parents=[common], help="generate a separable synthetic dataset")
    p.add_argument("--classes", required=True, type=int)
    p.add_argument("--rows", required=True, type=int, help="total rows, split evenly across classes")
    p.add_argument("--sep", required=True, type=float)
    p.add_argument("--features", type=int, default=8)
    p.add_argument("--out", type=Path, default=Path("synthetic"))
    return parser


def _config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    changes = {}
    if args.seed is not None:
        changes["seeds"] = [args.seed]
    if args.epochs is not None:
        changes["epochs"] = args.epochs
    if args.batch_size is not None:
        changes["batch_size"] = args.batch_size
    if args.lr is not None:
        changes["lr"] = args.lr
    if args.no_smote:
        changes["smote"] = False
    return dataclasses.replace(config, **changes)


def _eval_text(report: EvalReport, fmt: str, title: str) -> str:
    if fmt == "csv":
        return report.to_csv()
    if fmt == "jsonl":
        return json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
    return report.to_table(title)


def cmd_prepare(args) -> int:
    recipe = DatasetRecipe.load(args.recipe)
    smote = None if args.no_smote else SmoteConfig(seed=42 if args.seed is None else args.seed)
    prepared = prepare(recipe, test_fraction=args.test_fraction,
                       split_seed=42 if args.seed is None else args.seed, smote=smote)
    args.out.mkdir(parents=True, exist_ok=True)
    label = recipe.label_column
    prepared.train.to_csv(args.out / "train.csv", label)
    prepared.test.to_csv(args.out / "test.csv", label)
    meta = {
        "name": recipe.name,
        "steps": prepared.steps,
        "features": prepared.feature_names,
        "classes": prepared.class_names,
        "train_counts": prepared.train.counts_by_name(),
        "test_counts": prepared.test.counts_by_name(),
    }
    (args.out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(prepared.train)} train / {len(prepared.test)} test rows to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config(args)
    if args.out is not None:
        config.output_dir = args.out
    if config.output_dir is not None:
        config.output_dir.mkdir(parents=True, exist_ok=True)
    result = run_single(config, args.activation, config.seeds[0], prepare_for(config))
    print(_eval_text(result.report, args.format, f"{args.activation} seed {result.seed} on {config.dataset_name}"), end="")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise DataError(f"cannot read model {args.model}: {exc}") from exc
    names = model.class_names or [str(i) for i in range(model.spec.n_classes)]
    recipe = DatasetRecipe(csv=args.data, label_column=args.label_column, label_mapping={n: n for n in names})
    data = load_csv(recipe)
    if data.features.shape[1] != model.spec.input_len:
        raise DataError(f"{args.data} has {data.features.shape[1]} features; model expects {model.spec.input_len}")
    report = evaluate(data.labels, model.predict(data.features), names)
    print(_eval_text(report, args.format, f"{args.model.name} on {args.data.name}"), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _config(args)
    if config.output_dir is not None:
        config.output_dir.mkdir(parents=True, exist_ok=True)
    report = compare(config)
    if args.out is None:
        print(render(report, args.format), end="")
    else:
        out = args.out if args.out.suffix else args.out.with_suffix(SUFFIX[args.format])
        emit_report(report, args.format, out)
        print(f"wrote {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.classes < 2 or args.rows < args.classes:
        raise DomainError("need at least 2 classes and one row per class")
    ds = generate_synthetic(args.rows // args.classes, args.features, args.classes, args.sep,
                            0 if args.seed is None else args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    ds.to_csv(args.out / "synthetic.csv")
    recipe = {
        "name": "synthetic",
        "csv": "synthetic.csv",
        "label_column": "label",
        "correlation_threshold": 0.0,
        "label_mapping": {n: n for n in ds.class_names},
        "expected_counts": ds.counts_by_name(),
    }
    (args.out / "recipe.yaml").write_text(yaml.safe_dump(recipe, sort_keys=False), encoding="utf-8")
    print(f"wrote {len(ds)} rows to {args.out / 'synthetic.csv'}")
    return EXIT_OK


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "evaluate": cmd_evaluate,
            "compare": cmd_compare, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except TrainingDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, DomainError, ShapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
