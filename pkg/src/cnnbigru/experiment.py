"""Train/evaluate runs and side-by-side activation comparisons."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field, fields
from itertools import combinations
from pathlib import Path

import yaml

from .activations import ActivationKind
from .data import DatasetRecipe
from .engine import Adam, Model, ModelSpec, save_model, train
from .errors import DataError, DomainError
from .metrics import EvalReport, evaluate, pct
from .pipeline import PreparedData, prepare
from .smote import SmoteConfig

log = logging.getLogger(__name__)

METRICS = ("precision", "recall", "f1", "accuracy")
METRIC_LABELS = {"precision": "Precision", "recall": "Recall", "f1": "F1-Score", "accuracy": "Accuracy"}
FORMATS = ("csv", "table", "jsonl")
_SPEC_KEYS = {"conv_filters", "conv_kernel", "pool_size", "gru_units", "dense_units", "head", "output"}


@dataclass
class ExperimentConfig:
    recipe: Path | None = None
    name: str | None = None
    activations: list[str] = field(default_factory=lambda: ["mish", "relu"])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    test_fraction: float = 0.2
    split_seed: int = 42
    smote: bool = True
    smote_k: int = 5
    model: dict = field(default_factory=dict)  # ModelSpec overrides
    output_dir: Path | None = None

    def __post_init__(self):
        if not self.activations:
            raise DomainError("activation list must not be empty")
        if not self.seeds:
            raise DomainError("seed list must not be empty")
        for a in self.activations:
            ActivationKind.parse(a)
        unknown = set(self.model) - _SPEC_KEYS
        if unknown:
            raise DomainError(f"unknown model overrides: {', '.join(sorted(unknown))}")
        self.seeds = [int(s) for s in self.seeds]
        if self.recipe is not None:
            self.recipe = Path(self.recipe)
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise DomainError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in ("recipe", "output_dir"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = path.parent / raw[key]
        return cls(**raw)

    @property
    def dataset_name(self) -> str:
        if self.name:
            return self.name
        if self.recipe is None:
            return "dataset"
        try:
            return DatasetRecipe.load(self.recipe).name
        except DataError:
            return self.recipe.stem

    def smote_config(self) -> SmoteConfig | None:
        return SmoteConfig(k=self.smote_k, seed=self.split_seed) if self.smote else None

    def model_spec(self, input_len: int, n_classes: int, activation: str) -> ModelSpec:
        overrides = dict(self.model)
        if overrides.get("output", "auto") == "auto":
            overrides["output"] = "sigmoid" if n_classes == 2 else "softmax"
        return ModelSpec(input_len=input_len, n_classes=n_classes,
                         hidden_activation=ActivationKind.parse(activation), **overrides)


def prepare_for(config: ExperimentConfig) -> PreparedData:
    if config.recipe is None:
        raise DataError("config has no recipe")
    recipe = DatasetRecipe.load(config.recipe)
    return prepare(recipe, test_fraction=config.test_fraction, split_seed=config.split_seed,
                   smote=config.smote_config())


@dataclass
class RunResult:
    activation: str
    seed: int
    model: Model
    report: EvalReport
    loss_trace: list[float]
    seconds: float


def run_single(config: ExperimentConfig, activation: str, seed: int, prepared: PreparedData | None = None) -> RunResult:
    """Train one model on the prepared train split and evaluate it on the untouched test split."""
    prepared = prepared or prepare_for(config)
    tr, te = prepared.train, prepared.test
    spec = config.model_spec(tr.features.shape[1], tr.n_classes, activation)
    model = Model.create(spec, seed=seed, class_names=tr.class_names)
    start = time.perf_counter()
    trace = train(model, tr.features, tr.labels, epochs=config.epochs, batch_size=config.batch_size,
                  optimizer=Adam(config.lr, config.beta1, config.beta2, config.eps), seed=seed)
    model.quantize()
    seconds = time.perf_counter() - start
    result = evaluate(te.labels, model.predict(te.features), te.class_names)
    log.info("%s seed %d: accuracy %s, macro F1 %s", activation, seed, pct(result.accuracy), pct(result.macro_f1))
    if config.output_dir is not None:
        stem = f"{config.dataset_name}_{activation}_seed{seed}"
        save_model(model, config.output_dir / f"{stem}.model")
        (config.output_dir / f"{stem}_report.csv").write_text(result.to_csv(), encoding="utf-8")
    return RunResult(activation, seed, model, result, trace, seconds)


@dataclass(frozen=True)
class DifferenceRow:
    metric: str
    activation_a: str
    activation_b: str
    value_a: float
    value_b: float

    @property
    def difference(self) -> float:
        return self.value_a - self.value_b

    @property
    def difference_pp(self) -> float:
        return 100.0 * self.difference


def difference_rows(name_a: str, summary_a: dict, name_b: str, summary_b: dict) -> list[DifferenceRow]:
    return [DifferenceRow(m, name_a, name_b, summary_a[m], summary_b[m]) for m in METRICS]


def signed_pp(value: float) -> str:
    text = f"{value:+.2f}"
    return "+0.00" if text == "-0.00" else text


@dataclass
class ComparisonReport:
    dataset: str
    activations: list[str]
    seeds: list[int]
    per_seed: dict[str, list[EvalReport]]

    @property
    def mean(self) -> dict[str, EvalReport]:
        return {a: EvalReport.mean(self.per_seed[a]) for a in self.activations}

    @property
    def differences(self) -> list[DifferenceRow]:
        means = self.mean
        rows = []
        for a, b in combinations(self.activations, 2):
            rows += difference_rows(a, means[a].summary(), b, means[b].summary())
        return rows

    def spread(self, activation: str, metric: str) -> tuple[float, float, float]:
        """Mean over seeds plus the per-seed extremes; the mean agrees with ``self.mean``."""
        values = [r.summary()[metric] for r in self.per_seed[activation]]
        lo, hi = min(values), max(values)
        return min(max(self.mean[activation].summary()[metric], lo), hi), lo, hi


def compare(config: ExperimentConfig, prepared: PreparedData | None = None) -> ComparisonReport:
    """Train every (activation, seed) pair on one shared split and SMOTE output."""
    prepared = prepared or prepare_for(config)
    per_seed: dict[str, list[EvalReport]] = {}
    for activation in config.activations:
        if activation in per_seed:
            continue
        per_seed[activation] = [run_single(config, activation, s, prepared).report for s in config.seeds]
    result = ComparisonReport(config.dataset_name, list(config.activations), list(config.seeds), per_seed)
    if {"mish", "relu"} <= set(per_seed):
        means = result.mean
        delta = means["mish"].macro_f1 - means["relu"].macro_f1
        log.info("%s: mish - relu macro F1 = %s pp (%s)", result.dataset, signed_pp(100 * delta),
                 "mish ahead" if delta > 0 else "mish not ahead")
    return result


# -- report output -----------------------------------------------------------

def _f(x: float) -> str:
    return repr(float(x))


def render_table(report: ComparisonReport) -> str:
    out = []
    means = report.mean
    for a in dict.fromkeys(report.activations):
        out.append(means[a].to_table(f"{a} results on {report.dataset} (mean of seeds {report.seeds})"))
    out.append(f"Seed spread on {report.dataset}: mean [min, max]")
    for a in dict.fromkeys(report.activations):
        cells = []
        for m in METRICS:
            mu, lo, hi = report.spread(a, m)
            cells.append(f"{METRIC_LABELS[m]} {100 * mu:.2f} [{100 * lo:.2f}, {100 * hi:.2f}]")
        out.append(f"  {a}: " + "; ".join(cells))
    out.append("")
    for a, b in combinations(report.activations, 2):
        out.append(f"Summary of {a} and {b} results")
        out.append(f"{'Dataset':<14} {'Metric':<10} {a + ' (%)':>10} {b + ' (%)':>10} {'Difference (%)':>15}")
        for i, row in enumerate(r for r in report.differences if (r.activation_a, r.activation_b) == (a, b)):
            label = report.dataset if i == 0 else ""
            out.append(f"{label:<14} {METRIC_LABELS[row.metric]:<10} {100 * row.value_a:>10.2f} "
                       f"{100 * row.value_b:>10.2f} {signed_pp(row.difference_pp):>15}")
        out.append("")
    return "\n".join(out)


def render_csv(report: ComparisonReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "dataset", "activation", "seed", "class", "metric", "value"])
    means = report.mean
    for a in dict.fromkeys(report.activations):
        runs = list(zip(map(str, report.seeds), report.per_seed[a])) + [("mean", means[a])]
        for seed, r in runs:
            for name, (p, rc, f) in zip(r.class_names, r.per_class):
                for metric, v in (("precision", p), ("recall", rc), ("f1", f)):
                    w.writerow(["per_class", report.dataset, a, seed, name, metric, _f(v)])
            for metric, v in r.summary().items():
                w.writerow(["macro", report.dataset, a, seed, "", metric, _f(v)])
    for row in report.differences:
        w.writerow(["difference", report.dataset, f"{row.activation_a}|{row.activation_b}", "mean", "",
                    row.metric, _f(row.difference_pp)])
    return buf.getvalue()


def render_jsonl(report: ComparisonReport) -> str:
    lines = []
    dump = lambda obj: json.dumps(obj, sort_keys=True, separators=(",", ":"))  # noqa: E731
    means = report.mean
    for a in dict.fromkeys(report.activations):
        for seed, r in zip(report.seeds, report.per_seed[a]):
            lines.append(dump({"kind": "run", "dataset": report.dataset, "activation": a, "seed": seed, **r.to_dict()}))
        lines.append(dump({"kind": "mean", "dataset": report.dataset, "activation": a, **means[a].to_dict()}))
    for row in report.differences:
        lines.append(dump({"kind": "difference", "dataset": report.dataset, "metric": row.metric,
                           "activation_a": row.activation_a, "activation_b": row.activation_b,
                           "value_a": row.value_a, "value_b": row.value_b, "difference_pp": row.difference_pp}))
    return "\n".join(lines) + "\n"


_RENDERERS = {"csv": render_csv, "table": render_table, "jsonl": render_jsonl}
SUFFIX = {"csv": ".csv", "table": ".txt", "jsonl": ".jsonl"}


def render(report: ComparisonReport, fmt: str) -> str:
    if fmt not in _RENDERERS:
        raise DomainError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    return _RENDERERS[fmt](report)


def emit_report(report: ComparisonReport, fmt: str, path) -> Path:
    """Write the report in ``fmt``; output bytes depend only on the report's contents."""
    text = render(report, fmt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise DataError(f"cannot write report to {path}: {exc}") from exc
    return path
