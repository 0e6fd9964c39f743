from .io import load_model, save_model
from .layers import bigru_forward, conv1d_forward, dense_forward, global_average_pool, maxpool1d_forward
from .model import (
    Model,
    ModelParams,
    ModelSpec,
    backward,
    cross_entropy_loss,
    init_params,
    loss,
    loss_and_grads,
    model_forward,
    param_layout,
    predict,
    predict_proba,
)
from .optim import Adam, adam_step
from .train import train

__all__ = [
    "Adam",
    "Model",
    "ModelParams",
    "ModelSpec",
    "adam_step",
    "backward",
    "bigru_forward",
    "conv1d_forward",
    "cross_entropy_loss",
    "dense_forward",
    "global_average_pool",
    "init_params",
    "load_model",
    "loss",
    "loss_and_grads",
    "maxpool1d_forward",
    "model_forward",
    "param_layout",
    "predict",
    "predict_proba",
    "save_model",
    "train",
]
