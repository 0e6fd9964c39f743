"""Scalar activation functions, their derivatives, and softmax.

Every function accepts a Python float or a numpy array and evaluates
elementwise; scalars come back as floats.  All paths are overflow-safe for
|x| up to at least 1e3.

Subgradient convention: the ReLU family (relu, lrelu, prelu) uses the right
derivative at the kink, so f'(0) = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

KINDS = ("sigmoid", "tanh", "relu", "lrelu", "prelu", "elu", "softplus", "mish", "linear")
RELU_FAMILY = frozenset({"relu", "lrelu", "prelu"})

_DEFAULT_ALPHA = {"lrelu": 0.01, "prelu": 0.25, "elu": 1.0}


@dataclass(frozen=True)
class ActivationKind:
    """One member of the activation zoo.

    ``alpha`` is meaningful for lrelu/elu (fixed, > 0) and prelu (initial value
    of the learned negative slope, any sign).  It is ``None`` for the rest.
    """

    name: str
    alpha: float | None = None

    def __post_init__(self):
        if self.name not in KINDS:
            raise DomainError(f"unknown activation {self.name!r}; expected one of {', '.join(KINDS)}")
        if self.name in _DEFAULT_ALPHA:
            if self.alpha is None:
                object.__setattr__(self, "alpha", _DEFAULT_ALPHA[self.name])
            alpha = float(self.alpha)
            if not math.isfinite(alpha):
                raise DomainError(f"{self.name} alpha must be finite, got {alpha}")
            if self.name in ("lrelu", "elu") and alpha <= 0:
                raise DomainError(f"{self.name} alpha must be > 0, got {alpha}")
            object.__setattr__(self, "alpha", alpha)
        elif self.alpha is not None:
            raise DomainError(f"{self.name} takes no alpha")

    @classmethod
    def parse(cls, text: str) -> "ActivationKind":
        """Parse ``name`` or ``name:alpha`` (e.g. ``lrelu:0.1``)."""
        name, _, alpha = text.strip().lower().partition(":")
        return cls(name, float(alpha) if alpha else None)

    @property
    def learnable(self) -> bool:
        return self.name == "prelu"

    def with_alpha(self, alpha: float) -> "ActivationKind":
        return replace(self, alpha=float(alpha))

    def __str__(self) -> str:
        return self.name


SIGMOID = ActivationKind("sigmoid")
TANH = ActivationKind("tanh")
RELU = ActivationKind("relu")
SOFTPLUS = ActivationKind("softplus")
MISH = ActivationKind("mish")
LINEAR = ActivationKind("linear")


def as_kind(kind: ActivationKind | str) -> ActivationKind:
    return kind if isinstance(kind, ActivationKind) else ActivationKind.parse(kind)


def _checked(x):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("activation input must be finite")
    return arr


def _out(x, result):
    return float(result) if np.ndim(x) == 0 else result


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(x):
    # logaddexp(0, x) = max(x, 0) + log1p(exp(-|x|))
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def _forward(kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    name = kind.name
    if name == "sigmoid":
        return sigmoid(x)
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name in ("lrelu", "prelu"):
        return np.where(x >= 0, x, kind.alpha * x)
    if name == "elu":
        return np.where(x > 0, x, kind.alpha * np.expm1(np.minimum(x, 0.0)))
    if name == "softplus":
        return softplus(x)
    if name == "mish":
        return x * np.tanh(softplus(x))
    return x.copy()


def _derivative(kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    name = kind.name
    if name == "sigmoid":
        s = sigmoid(x)
        return s * (1.0 - s)
    if name == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if name == "relu":
        return np.where(x >= 0, 1.0, 0.0)
    if name in ("lrelu", "prelu"):
        return np.where(x >= 0, 1.0, kind.alpha)
    if name == "elu":
        return np.where(x > 0, 1.0, kind.alpha * np.exp(np.minimum(x, 0.0)))
    if name == "softplus":
        return sigmoid(x)
    if name == "mish":
        t = np.tanh(softplus(x))
        return t + x * (1.0 - t * t) * sigmoid(x)
    return np.ones_like(x)


def activate(kind: ActivationKind | str, x):
    """Evaluate the activation ``kind`` at ``x``."""
    kind = as_kind(kind)
    arr = _checked(x)
    return _out(x, _forward(kind, arr))


def activate_grad(kind: ActivationKind | str, x):
    """First derivative of ``kind`` at ``x`` (right derivative at ReLU-family kinks)."""
    kind = as_kind(kind)
    arr = _checked(x)
    return _out(x, _derivative(kind, arr))


def activate_alpha_grad(kind: ActivationKind | str, x):
    """Partial derivative of prelu with respect to its slope: x for x < 0, else 0."""
    kind = as_kind(kind)
    if kind.name != "prelu":
        raise DomainError(f"{kind.name} has no learnable parameter")
    arr = _checked(x)
    return _out(x, np.where(arr < 0, arr, 0.0))


def softmax(logits, axis: int = -1) -> np.ndarray:
    """Normalized exponentials along ``axis``, computed after subtracting the max."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 0 or z.shape[axis] == 0:
        raise DomainError("softmax needs at least one logit")
    if not np.all(np.isfinite(z)):
        raise DomainError("softmax logits must be finite")
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
