from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import DomainError, TrainingDivergence
from .model import Model, loss_and_grads
from .optim import Adam

log = logging.getLogger(__name__)


def train(model: Model, X, y, *, epochs: int = 100, batch_size: int = 32, optimizer: Adam | None = None,
          seed: int = 0) -> list[float]:
    """Mini-batch Adam training.  Mutates ``model.params``; returns the per-step loss trace.

    Batches are reshuffled every epoch from a generator seeded with ``seed``.
    Raises TrainingDivergence when the loss or any gradient stops being finite.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if epochs < 0 or batch_size <= 0:
        raise DomainError("epochs must be >= 0 and batch_size > 0")
    optimizer = optimizer or Adam()
    rng = np.random.default_rng(seed)
    trace: list[float] = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(X))
        for start in range(0, len(X), batch_size):
            idx = order[start:start + batch_size]
            try:
                value, grads = loss_and_grads(model.spec, model.params, X[idx], y[idx])
            except (DomainError, FloatingPointError) as exc:
                raise TrainingDivergence(epoch, math.nan) from exc
            if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDivergence(epoch, value)
            optimizer.step(model.params, grads)
            trace.append(value)
        if trace:
            log.debug("epoch %d loss %.6f", epoch, trace[-1])
    return trace
