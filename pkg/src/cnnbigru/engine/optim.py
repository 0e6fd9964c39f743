import numpy as np

from ..errors import DomainError, ShapeError


class Adam:
    """Adam with bias correction.  Holds the step count and both moment estimates."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        for name, value in (("lr", lr), ("beta1", beta1), ("beta2", beta2), ("eps", eps)):
            if not value > 0:
                raise DomainError(f"{name} must be positive, got {value}")
        if not (beta1 < 1 and beta2 < 1):
            raise DomainError("beta1 and beta2 must be < 1")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> dict:
        """Update ``params`` in place and return it."""
        if params.keys() != grads.keys():
            raise ShapeError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
        for k in params:
            if np.shape(grads[k]) != np.shape(params[k]):
                raise ShapeError(f"gradient for {k} has shape {np.shape(grads[k])}, parameter {np.shape(params[k])}")
            if k in self.m and self.m[k].shape != np.shape(params[k]):
                raise ShapeError(f"optimizer state for {k} does not match parameter shape")

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k], dtype=np.float64)
                self.v[k] = np.zeros_like(params[k], dtype=np.float64)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            params[k] = params[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


def adam_step(state: Adam, params: dict, grads: dict) -> tuple[dict, Adam]:
    return state.step(params, grads), state
