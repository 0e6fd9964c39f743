"""The CNN-BiGRU classifier: Conv1D -> MaxPool -> BiGRU -> head -> output.

Parameters live in a plain ``dict[str, ndarray]`` whose key order is fixed by
:func:`param_layout`; gradients and optimizer moments use the same keys.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..activations import ActivationKind, as_kind, log_softmax, sigmoid, softmax, softplus
from ..errors import DomainError, ShapeError
from . import layers

PROB_FLOOR = 1e-12
_LOG_FLOOR = math.log(PROB_FLOOR)

ModelParams = dict  # str -> np.ndarray, ordered per param_layout


@dataclass(frozen=True)
class ModelSpec:
    input_len: int
    n_classes: int = 2
    conv_filters: int = 32
    conv_kernel: int = 3
    pool_size: int = 2
    gru_units: int = 64
    dense_units: int = 128
    head: str = "dense"  # "dense" | "gap"
    hidden_activation: ActivationKind = field(default_factory=lambda: ActivationKind("relu"))
    output: str = "softmax"  # "softmax" | "sigmoid"

    def __post_init__(self):
        object.__setattr__(self, "hidden_activation", as_kind(self.hidden_activation))
        for name in ("input_len", "n_classes", "conv_filters", "conv_kernel", "pool_size", "gru_units", "dense_units"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value <= 0:
                raise DomainError(f"{name} must be a positive int, got {value!r}")
        if self.head not in ("dense", "gap"):
            raise DomainError(f"head must be 'dense' or 'gap', got {self.head!r}")
        if self.output not in ("softmax", "sigmoid"):
            raise DomainError(f"output must be 'softmax' or 'sigmoid', got {self.output!r}")
        if self.n_classes < 2:
            raise DomainError("need at least 2 classes")
        if self.output == "sigmoid" and self.n_classes != 2:
            raise DomainError("sigmoid output is binary; n_classes must be 2")
        if self.input_len < self.conv_kernel:
            raise ShapeError(f"input_len {self.input_len} < conv_kernel {self.conv_kernel}")
        if self.conv_len < self.pool_size:
            raise ShapeError(f"conv output length {self.conv_len} < pool_size {self.pool_size}")

    @property
    def conv_len(self) -> int:
        return self.input_len - self.conv_kernel + 1

    @property
    def seq_len(self) -> int:
        return self.conv_len // self.pool_size

    @property
    def n_outputs(self) -> int:
        return 1 if self.output == "sigmoid" else self.n_classes

    @property
    def head_width(self) -> int:
        return self.dense_units if self.head == "dense" else 2 * self.gru_units

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_activation"] = self.hidden_activation.name
        d["hidden_activation_alpha"] = self.hidden_activation.alpha
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        alpha = d.pop("hidden_activation_alpha", None)
        d["hidden_activation"] = ActivationKind(d["hidden_activation"], alpha)
        return cls(**d)


def param_layout(spec: ModelSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) pairs.  This order is also the on-disk order."""
    F, k, H = spec.conv_filters, spec.conv_kernel, spec.gru_units
    layout = [("conv.W", (F, k)), ("conv.b", (F,))]
    for d in ("fwd", "bwd"):
        layout += [(f"gru.{d}.W", (3, H, F)), (f"gru.{d}.U", (3, H, H)), (f"gru.{d}.b", (3, H))]
    if spec.head == "dense":
        layout += [("dense.W", (spec.dense_units, 2 * H)), ("dense.b", (spec.dense_units,))]
    layout += [("out.W", (spec.n_outputs, spec.head_width)), ("out.b", (spec.n_outputs,))]
    if spec.hidden_activation.learnable:
        layout += [("conv.alpha", (1,)), ("gru.alpha", (1,))]
        if spec.head == "dense":
            layout += [("dense.alpha", (1,))]
    return layout


def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(spec: ModelSpec, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases.  Values are float32-representable."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_layout(spec):
        if name.endswith(".alpha"):
            params[name] = np.full(shape, spec.hidden_activation.alpha)
        elif name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif name.startswith("gru."):
            fan_out, fan_in = shape[1], shape[2]
            params[name] = np.stack([_glorot(rng, shape[1:], fan_in, fan_out) for _ in range(3)])
        elif name == "conv.W":
            params[name] = _glorot(rng, shape, spec.conv_kernel, spec.conv_filters)
        else:
            params[name] = _glorot(rng, shape, shape[1], shape[0])
    return {n: p.astype(np.float32).astype(np.float64) for n, p in params.items()}


def check_params(spec: ModelSpec, params: ModelParams):
    for name, shape in param_layout(spec):
        if name not in params:
            raise ShapeError(f"missing parameter {name}")
        if tuple(np.shape(params[name])) != shape:
            raise ShapeError(f"parameter {name} has shape {np.shape(params[name])}, expected {shape}")


def _act(spec, params, layer):
    act = spec.hidden_activation
    if act.learnable:
        act = act.with_alpha(float(params[f"{layer}.alpha"][0]))
    return act


def _gru_params(params):
    return {k[len("gru."):]: v for k, v in params.items() if k.startswith("gru.") and not k.endswith("alpha")}


def _forward(spec: ModelSpec, params: ModelParams, X: np.ndarray):
    """Batched forward on X: (N, input_len).  Returns logits (N, n_outputs) and caches."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_len:
        raise ShapeError(f"expected inputs of shape (N, {spec.input_len}), got {X.shape}")
    a1, c_conv = layers.conv1d_fwd(X[..., None], params["conv.W"], params["conv.b"], _act(spec, params, "conv"))
    pooled, c_pool = layers.maxpool1d_fwd(a1, spec.pool_size)
    seq, c_gru = layers.bigru_fwd(pooled, _gru_params(params), spec.gru_units, _act(spec, params, "gru"))
    H = spec.gru_units
    c_dense = None
    if spec.head == "dense":
        # final state of each direction: forward at t = T-1, backward at t = 0
        last = np.concatenate([seq[:, -1, :H], seq[:, 0, H:]], axis=-1)
        feats, c_dense = layers.dense_fwd(last, params["dense.W"], params["dense.b"], _act(spec, params, "dense"))
    else:
        feats = layers.global_average_pool(seq)
    logits = feats @ params["out.W"].T + params["out.b"]
    return logits, (c_conv, c_pool, c_gru, c_dense, feats, seq.shape)


def _probs_from_logits(spec, logits):
    return sigmoid(logits) if spec.output == "sigmoid" else softmax(logits, axis=-1)


def model_forward(spec: ModelSpec, params: ModelParams, x) -> np.ndarray:
    """Head probabilities for one sample (shape (K,) or (1,) for sigmoid) or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return model_forward(spec, params, x[None])[0]
    logits, _ = _forward(spec, params, x)
    return _probs_from_logits(spec, logits)


def predict_proba(spec: ModelSpec, params: ModelParams, X) -> np.ndarray:
    """Class probabilities (N, K); a sigmoid head expands p to [1-p, p]."""
    p = model_forward(spec, params, np.atleast_2d(X))
    if spec.output == "sigmoid":
        return np.concatenate([1.0 - p, p], axis=-1)
    return p


def predict(spec: ModelSpec, params: ModelParams, X, batch_size: int = 1024) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = [predict_proba(spec, params, X[i:i + batch_size]).argmax(axis=-1) for i in range(0, len(X), batch_size)]
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def cross_entropy_loss(probs, label: int) -> float:
    """-ln p[label] with p floored at 1e-12.  A length-1 vector is a sigmoid head."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ShapeError("probs must be a non-empty vector")
    if probs.size == 1:
        if label not in (0, 1):
            raise DomainError(f"binary label must be 0 or 1, got {label}")
        p = float(probs[0])
        return -(label * math.log(max(p, PROB_FLOOR)) + (1 - label) * math.log(max(1.0 - p, PROB_FLOOR)))
    if not 0 <= label < probs.size:
        raise DomainError(f"label {label} out of range for {probs.size} classes")
    return -math.log(max(float(probs[label]), PROB_FLOOR))


def _loss_and_dlogits(spec, logits, y):
    """Mean clamped cross-entropy over the batch and its gradient w.r.t. logits."""
    N = len(y)
    if spec.output == "sigmoid":
        l = logits[:, 0]
        # log p = -softplus(-l), log(1-p) = -softplus(l)
        log_p = np.where(y == 1, -softplus(-l), -softplus(l))
        active = log_p >= _LOG_FLOOR
        losses = -np.maximum(log_p, _LOG_FLOOR)
        d = np.where(active, sigmoid(l) - y, 0.0)[:, None]
    else:
        logp = log_softmax(logits, axis=-1)
        picked = logp[np.arange(N), y]
        active = picked >= _LOG_FLOOR
        losses = -np.maximum(picked, _LOG_FLOOR)
        d = softmax(logits, axis=-1)
        d[np.arange(N), y] -= 1.0
        d *= active[:, None]
    return float(losses.mean()), d / N


def _check_labels(spec, y):
    y = np.asarray(y)
    if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
        raise DomainError("labels must be a 1-D integer vector")
    if y.size and (y.min() < 0 or y.max() >= spec.n_classes):
        raise DomainError(f"labels must lie in [0, {spec.n_classes})")
    return y


def loss(spec: ModelSpec, params: ModelParams, X, y) -> float:
    y = _check_labels(spec, np.atleast_1d(y))
    logits, _ = _forward(spec, params, np.atleast_2d(X))
    return _loss_and_dlogits(spec, logits, y)[0]


def loss_and_grads(spec: ModelSpec, params: ModelParams, X, y) -> tuple[float, ModelParams]:
    """Mean cross-entropy over the batch and exact reverse-mode gradients."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = _check_labels(spec, np.atleast_1d(y))
    if len(y) != len(X):
        raise ShapeError(f"{len(X)} samples but {len(y)} labels")
    logits, (c_conv, c_pool, c_gru, c_dense, feats, seq_shape) = _forward(spec, params, X)
    value, dlogits = _loss_and_dlogits(spec, logits, y)

    grads = {"out.W": dlogits.T @ feats, "out.b": dlogits.sum(axis=0)}
    dfeats = dlogits @ params["out.W"]
    H = spec.gru_units
    if spec.head == "dense":
        dlast, g = layers.dense_bwd(dfeats, c_dense)
        for k, v in g.items():
            grads[f"dense.{k}"] = v
        dseq = np.zeros(seq_shape)
        dseq[:, -1, :H] += dlast[:, :H]
        dseq[:, 0, H:] += dlast[:, H:]
    else:
        dseq = layers.global_average_pool_bwd(dfeats, seq_shape[-2])
    dpooled, g = layers.bigru_bwd(dseq, c_gru)
    for k, v in g.items():
        grads[f"gru.{k}"] = v
    da1 = layers.maxpool1d_bwd(dpooled, c_pool)
    for k, v in layers.conv1d_bwd(da1, c_conv).items():
        grads[f"conv.{k}"] = v
    return value, {name: grads[name] for name, _ in param_layout(spec)}


def backward(spec: ModelSpec, params: ModelParams, x, label: int) -> ModelParams:
    """Gradients of the single-sample loss cross_entropy(model_forward(x), label)."""
    return loss_and_grads(spec, params, np.asarray(x, dtype=np.float64)[None], np.array([label]))[1]


@dataclass
class Model:
    """A spec with its parameters and the class names it was trained on."""

    spec: ModelSpec
    params: ModelParams
    class_names: list[str] = field(default_factory=list)

    @classmethod
    def create(cls, spec: ModelSpec, seed: int, class_names=None) -> "Model":
        return cls(spec, init_params(spec, seed), list(class_names or []))

    def forward(self, x):
        return model_forward(self.spec, self.params, x)

    def predict_proba(self, X):
        return predict_proba(self.spec, self.params, X)

    def predict(self, X):
        return predict(self.spec, self.params, X)

    def quantize(self) -> "Model":
        """Round every parameter to float32 so that a saved file reloads bit-exactly."""
        for name in self.params:
            self.params[name] = self.params[name].astype(np.float32).astype(np.float64)
        return self
