"""Synthetic minority over-sampling by interpolation toward same-class nearest neighbours."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset
from .errors import DataError, DomainError


@dataclass
class SmoteConfig:
    """``strategy`` maps class name (or index) to a target row count.

    ``None`` means every class is raised to the majority-class count.
    """

    k: int = 5
    strategy: dict | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")

    def targets(self, dataset: LabeledDataset) -> np.ndarray:
        counts = dataset.class_counts()
        if self.strategy is None:
            return np.full_like(counts, counts.max())
        targets = counts.copy()
        for key, target in self.strategy.items():
            c = dataset.class_names.index(key) if isinstance(key, str) else int(key)
            if target < counts[c]:
                raise DomainError(f"target {target} for class {dataset.class_names[c]!r} is below its count {counts[c]}")
            targets[c] = target
        return targets


@dataclass(frozen=True)
class SyntheticSample:
    features: np.ndarray = field(repr=False)
    source_index: int  # row index in the input dataset
    neighbor_index: int
    lam: float


def knn_same_class(points: np.ndarray, query_index: int, k: int) -> list[int]:
    """Indices of the k rows of ``points`` closest to row ``query_index``, itself excluded.

    Euclidean distance; ties go to the lower index; k is capped at len(points) - 1.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 2:
        raise DataError("need at least two points of a class to find neighbours")
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    diff = points - points[query_index]
    dist = np.einsum("ij,ij->i", diff, diff)
    others = np.delete(np.arange(n), query_index)
    order = np.argsort(dist[others], kind="stable")
    return others[order[: min(k, n - 1)]].tolist()


def synthesize(x_i, x_ni, lam: float) -> np.ndarray:
    """x_i + lam * (x_ni - x_i)."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_ni = np.asarray(x_ni, dtype=np.float64)
    if x_i.shape != x_ni.shape:
        raise DomainError(f"length mismatch: {x_i.shape} vs {x_ni.shape}")
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must be in [0, 1], got {lam}")
    return x_i + lam * (x_ni - x_i)


def resample_with_provenance(dataset: LabeledDataset, config: SmoteConfig) -> tuple[LabeledDataset, list[SyntheticSample]]:
    """Like :func:`resample`, also returning how each synthetic row was built."""
    rng = np.random.default_rng(config.seed)
    counts = dataset.class_counts()
    targets = config.targets(dataset)
    new_rows, new_labels, samples = [], [], []
    for c in range(dataset.n_classes):
        need = int(targets[c] - counts[c])
        if need <= 0:
            continue
        members = np.flatnonzero(dataset.labels == c)
        if len(members) < 2:
            raise DataError(f"class {dataset.class_names[c]!r} has {len(members)} row(s); SMOTE needs at least 2")
        points = dataset.features[members]
        neighbours: dict[int, list[int]] = {}
        for _ in range(need):
            i = int(rng.integers(len(members)))
            if i not in neighbours:
                neighbours[i] = knn_same_class(points, i, config.k)
            ni = neighbours[i][int(rng.integers(len(neighbours[i])))]
            lam = float(rng.random())
            row = synthesize(points[i], points[ni], lam)
            new_rows.append(row)
            new_labels.append(c)
            samples.append(SyntheticSample(row, int(members[i]), int(members[ni]), lam))
    if not new_rows:
        return dataset, []
    out = LabeledDataset(
        np.vstack([dataset.features, np.array(new_rows)]),
        np.concatenate([dataset.labels, np.array(new_labels, dtype=np.int64)]),
        dataset.class_names,
        dataset.feature_names,
    )
    return out, samples


def resample(dataset: LabeledDataset, config: SmoteConfig | None = None) -> LabeledDataset:
    """Original rows first, then synthetic minority rows until every class meets its target."""
    return resample_with_provenance(dataset, config or SmoteConfig())[0]
