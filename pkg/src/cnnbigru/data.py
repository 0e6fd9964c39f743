"""Datasets, recipes and the preprocessing steps: CSV loading, scaling, Pearson selection, splitting."""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import DataError

log = logging.getLogger(__name__)


class ClassCountWarning(UserWarning):
    """Loaded class counts differ from the counts a recipe expects."""


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: list[str]
    feature_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError(f"{self.features.shape[0]} rows but {self.labels.shape} labels")
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError(f"{self.features.shape[1]} feature columns but {len(self.feature_names)} names")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DataError(f"labels must lie in [0, {len(self.class_names)})")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        self.class_names = list(self.class_names)
        self.feature_names = list(self.feature_names)

    def __len__(self):
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def counts_by_name(self) -> dict[str, int]:
        return dict(zip(self.class_names, self.class_counts().tolist()))

    def rows(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx], self.class_names, self.feature_names)

    def columns(self, idx) -> "LabeledDataset":
        idx = list(idx)
        return LabeledDataset(self.features[:, idx], self.labels, self.class_names, [self.feature_names[i] for i in idx])

    def to_csv(self, path, label_column: str = "label"):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.feature_names, label_column])
            for row, label in zip(self.features, self.labels):
                w.writerow([*map(repr, row.tolist()), self.class_names[label]])


@dataclass
class DatasetRecipe:
    """How to turn one CSV export into a LabeledDataset.

    ``label_mapping`` maps each raw label string to a class name; classes are
    encoded 0, 1, ... in the order they first appear in the mapping.
    """

    csv: Path
    label_column: str
    label_mapping: dict[str, str]
    name: str = "dataset"
    drop_columns: list[str] = field(default_factory=list)
    correlation_threshold: float = 0.5
    scale: bool = True
    expected_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.csv = Path(self.csv)
        self.label_mapping = {str(k): str(v) for k, v in self.label_mapping.items()}
        self.drop_columns = [str(c) for c in self.drop_columns]
        self.expected_counts = {str(k): int(v) for k, v in (self.expected_counts or {}).items()}
        if not 0.0 <= self.correlation_threshold <= 1.0:
            raise DataError(f"correlation_threshold must be in [0, 1], got {self.correlation_threshold}")
        if not self.label_mapping:
            raise DataError("label_mapping is empty")

    @property
    def class_names(self) -> list[str]:
        return list(dict.fromkeys(self.label_mapping.values()))

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "DatasetRecipe":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise DataError(f"unknown recipe keys: {', '.join(sorted(unknown))}")
        for key in ("csv", "label_column", "label_mapping"):
            if key not in d:
                raise DataError(f"recipe is missing '{key}'")
        csv_path = Path(d["csv"])
        if base_dir is not None and not csv_path.is_absolute():
            csv_path = Path(base_dir) / csv_path
        d["csv"] = csv_path
        return cls(**d)

    @classmethod
    def load(cls, path) -> "DatasetRecipe":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise DataError(f"cannot read recipe {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError(f"recipe {path} must be a mapping")
        return cls.from_dict(raw, base_dir=path.parent)


def _parse(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(recipe: DatasetRecipe) -> LabeledDataset:
    """Read the recipe's CSV, keep numeric attribute columns and encode the mapped labels.

    A column is numeric when most of its cells parse as finite numbers; any
    remaining bad cell in such a column is an error.  Columns that are mostly
    text are dropped.
    """
    try:
        with recipe.csv.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {recipe.csv}: {exc}") from exc
    if not rows:
        raise DataError(f"{recipe.csv} is empty")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if recipe.label_column not in header:
        raise DataError(f"label column {recipe.label_column!r} not in {recipe.csv}")
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{recipe.csv} line {i}: {len(row)} fields, header has {len(header)}")

    label_idx = header.index(recipe.label_column)
    raw_labels = [row[label_idx].strip() for row in body]
    unknown = sorted(set(raw_labels) - set(recipe.label_mapping))
    if unknown:
        raise DataError(f"labels not covered by the mapping: {', '.join(map(repr, unknown))}")
    class_names = recipe.class_names
    code = {name: i for i, name in enumerate(class_names)}
    labels = np.array([code[recipe.label_mapping[r]] for r in raw_labels], dtype=np.int64)

    skip = set(recipe.drop_columns) | {recipe.label_column}
    names, columns = [], []
    for j, name in enumerate(header):
        if name in skip:
            continue
        values = [_parse(row[j]) for row in body]
        good = sum(v is not None for v in values)
        if not body or good * 2 <= len(body):
            log.debug("dropping non-numeric column %s", name)
            continue
        if good != len(body):
            i = next(i for i, v in enumerate(values) if v is None)
            raise DataError(f"{recipe.csv} line {i + 2}, column {name!r}: cannot parse {body[i][j]!r} as a finite number")
        names.append(name)
        columns.append(values)
    if not names:
        raise DataError(f"{recipe.csv} has no numeric attribute columns")
    features = np.array(columns, dtype=np.float64).T.reshape(len(body), len(names))
    dataset = LabeledDataset(features, labels, class_names, names)
    check_counts(dataset, recipe.expected_counts)
    return dataset


def check_counts(dataset: LabeledDataset, expected: dict[str, int]) -> bool:
    """Warn (never raise) when class counts differ from the expected ones."""
    if not expected:
        return True
    actual = dataset.counts_by_name()
    if {k: actual.get(k, 0) for k in expected} != expected:
        warnings.warn(f"class counts {actual} differ from expected {expected}", ClassCountWarning, stacklevel=2)
        return False
    log.info("class counts match expected %s", expected)
    return True


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray  # bool per feature; std < 1e-12, mapped to zeros

    def transform(self, features: np.ndarray) -> np.ndarray:
        safe = np.where(self.degenerate, 1.0, self.std)
        return np.where(self.degenerate, 0.0, (features - self.mean) / safe)


def standard_scale(dataset: LabeledDataset) -> tuple[LabeledDataset, Scaler]:
    """(x - mean) / std per feature with the population std."""
    if len(dataset) < 2:
        raise DataError("standard scaling needs at least 2 rows")
    mean = dataset.features.mean(axis=0)
    std = dataset.features.std(axis=0)
    scaler = Scaler(mean, std, std < 1e-12)
    scaled = LabeledDataset(scaler.transform(dataset.features), dataset.labels, dataset.class_names, dataset.feature_names)
    return scaled, scaler


def pearson_correlations(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Pearson r of each column with the encoded labels; 0 for zero-variance columns."""
    x = features - features.mean(axis=0)
    y = labels.astype(np.float64) - labels.mean()
    sx = np.sqrt((x * x).sum(axis=0))
    sy = math.sqrt(float((y * y).sum()))
    r = np.zeros(features.shape[1])
    ok = (sx > 1e-12 * max(1.0, np.abs(features).max(initial=0.0))) & (sy > 0)
    r[ok] = (x[:, ok] * y[:, None]).sum(axis=0) / (sx[ok] * sy)
    return np.clip(r, -1.0, 1.0)


def pearson_select(dataset: LabeledDataset, threshold: float = 0.5) -> LabeledDataset:
    """Keep features whose |r| with the encoded label exceeds ``threshold``, in original order."""
    r = pearson_correlations(dataset.features, dataset.labels)
    keep = np.flatnonzero(np.abs(r) > threshold)
    log.info("pearson selection kept %d of %d features", len(keep), len(r))
    return dataset.columns(keep)


def stratified_split_indices(labels, test_fraction: float, seed: int, n_classes: int | None = None):
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    labels = np.asarray(labels)
    n_classes = n_classes if n_classes is not None else int(labels.max()) + 1
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(n_classes):
        members = np.flatnonzero(labels == c)
        if len(members) == 0:
            continue
        if len(members) < 2:
            raise DataError(f"class {c} has a single row; cannot split it")
        n_test = min(max(1, math.floor(test_fraction * len(members) + 0.5)), len(members) - 1)
        perm = rng.permutation(members)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(dataset: LabeledDataset, test_fraction: float = 0.2, seed: int = 42):
    """Per-class proportional train/test split (nearest-integer test size, at least one per class)."""
    for name, count in dataset.counts_by_name().items():
        if count == 1:
            raise DataError(f"class {name!r} has a single row; cannot split it")
    train_idx, test_idx = stratified_split_indices(dataset.labels, test_fraction, seed, dataset.n_classes)
    return dataset.rows(train_idx), dataset.rows(test_idx)


def generate_synthetic(n_per_class: int, n_features: int, n_classes: int, separation: float, seed: int) -> LabeledDataset:
    """Unit-variance Gaussian blobs whose means sit ``separation`` apart along the diagonal."""
    if min(n_per_class, n_features, n_classes) <= 0 or separation < 0:
        raise DataError("synthetic dataset sizes must be positive and separation non-negative")
    rng = np.random.default_rng(seed)
    direction = np.ones(n_features) / math.sqrt(n_features)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    features = rng.normal(size=(len(labels), n_features)) + (labels * separation)[:, None] * direction
    order = rng.permutation(len(labels))
    return LabeledDataset(
        features[order],
        labels[order],
        [f"class_{c}" for c in range(n_classes)],
        [f"f{j}" for j in range(n_features)],
    )
