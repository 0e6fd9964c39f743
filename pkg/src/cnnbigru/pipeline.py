"""Preprocessing in its fixed order: load -> scale -> pearson_select -> split -> SMOTE (train only)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .data import DatasetRecipe, LabeledDataset, Scaler, load_csv, pearson_select, standard_scale, stratified_split
from .errors import DataError
from .smote import SmoteConfig, resample

log = logging.getLogger(__name__)

STEPS = ("load", "scale", "pearson_select", "split", "smote")


@dataclass
class PreparedData:
    train: LabeledDataset  # after SMOTE when enabled
    test: LabeledDataset
    train_original: LabeledDataset
    scaler: Scaler | None
    steps: list[str] = field(default_factory=list)

    @property
    def class_names(self) -> list[str]:
        return self.test.class_names

    @property
    def feature_names(self) -> list[str]:
        return self.test.feature_names


def prepare(source: DatasetRecipe | LabeledDataset, *, test_fraction: float = 0.2, split_seed: int = 42,
            smote: SmoteConfig | None = None, scale: bool | None = None,
            correlation_threshold: float | None = None) -> PreparedData:
    """Run every preprocessing step once, in order; ``steps`` records what actually ran."""
    steps = []
    if isinstance(source, DatasetRecipe):
        dataset = load_csv(source)
        scale = source.scale if scale is None else scale
        correlation_threshold = source.correlation_threshold if correlation_threshold is None else correlation_threshold
    else:
        dataset = source
        scale = True if scale is None else scale
        correlation_threshold = 0.5 if correlation_threshold is None else correlation_threshold
    steps.append("load")

    scaler = None
    if scale:
        dataset, scaler = standard_scale(dataset)
        steps.append("scale")

    selected = pearson_select(dataset, correlation_threshold)
    if selected.features.shape[1] == 0:
        raise DataError(f"no feature has |pearson r| > {correlation_threshold} with the label")
    if scaler is not None:
        keep = [dataset.feature_names.index(n) for n in selected.feature_names]
        scaler = Scaler(scaler.mean[keep], scaler.std[keep], scaler.degenerate[keep])
    dataset = selected
    steps.append("pearson_select")

    train, test = stratified_split(dataset, test_fraction, split_seed)
    steps.append("split")

    original = train
    if smote is not None:
        train = resample(train, smote)
        steps.append("smote")
    log.info("prepared %d train rows %s, %d test rows, %d features",
             len(train), train.counts_by_name(), len(test), train.features.shape[1])
    assert tuple(steps) == tuple(s for s in STEPS if s in steps)
    return PreparedData(train, test, original, scaler, steps)
