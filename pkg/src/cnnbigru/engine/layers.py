"""Layer primitives with hand-written backward passes.

Every forward accepts optional leading batch axes (``...``) in front of the
shapes documented on each function, and returns ``(output, cache)`` when
called through the ``*_fwd`` variants used by the model.  The plain
``*_forward`` functions return only the output.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..activations import ActivationKind, activate, activate_alpha_grad, activate_grad, as_kind, sigmoid
from ..errors import DomainError, ShapeError


def _require(cond: bool, msg: str):
    if not cond:
        raise ShapeError(msg)


# -- Conv1D ------------------------------------------------------------------

def conv1d_fwd(x, kernels, bias, act):
    """Valid cross-correlation, stride 1.  x: (..., L, 1) -> (..., L-k+1, F)."""
    x = np.asarray(x, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    act = as_kind(act)
    _require(x.ndim >= 2 and x.shape[-1] == 1, f"conv1d input must be [..., len, 1], got {x.shape}")
    _require(kernels.ndim == 2 and bias.shape == kernels.shape[:1], "conv1d kernels/bias shape mismatch")
    k = kernels.shape[1]
    _require(x.shape[-2] >= k, f"conv1d input length {x.shape[-2]} < kernel {k}")
    windows = sliding_window_view(x[..., 0], k, axis=-1)  # (..., T, k)
    pre = windows @ kernels.T + bias
    return activate(act, pre), (windows, pre, act)


def conv1d_bwd(dout, cache):
    windows, pre, act = cache
    dpre = dout * activate_grad(act, pre)
    grads = {
        "W": np.einsum("tf,tk->fk", dpre.reshape(-1, dpre.shape[-1]), windows.reshape(-1, windows.shape[-1])),
        "b": dpre.reshape(-1, dpre.shape[-1]).sum(axis=0),
    }
    if act.learnable:
        grads["alpha"] = np.array([np.sum(dout * activate_alpha_grad(act, pre))])
    return grads


def conv1d_forward(x, kernels, bias, act):
    return conv1d_fwd(x, kernels, bias, act)[0]


# -- MaxPool1D ---------------------------------------------------------------

def maxpool1d_fwd(x, pool: int):
    """Non-overlapping max over windows of ``pool`` steps; remainder dropped.  (..., L, C)."""
    if pool <= 0:
        raise DomainError(f"pool size must be positive, got {pool}")
    x = np.asarray(x, dtype=np.float64)
    _require(x.ndim >= 2, f"maxpool input must be [..., len, ch], got {x.shape}")
    length, ch = x.shape[-2:]
    _require(length >= pool, f"maxpool input length {length} < pool {pool}")
    t_out = length // pool
    blocks = x[..., : t_out * pool, :].reshape(*x.shape[:-2], t_out, pool, ch)
    idx = blocks.argmax(axis=-2)  # first maximum wins on ties
    out = np.take_along_axis(blocks, idx[..., None, :], axis=-2)[..., 0, :]
    return out, (x.shape, idx, pool)


def maxpool1d_bwd(dout, cache):
    shape, idx, pool = cache
    t_out, ch = idx.shape[-2:]
    dblocks = np.zeros((*shape[:-2], t_out, pool, ch))
    np.put_along_axis(dblocks, idx[..., None, :], dout[..., None, :], axis=-2)
    dx = np.zeros(shape)
    dx[..., : t_out * pool, :] = dblocks.reshape(*shape[:-2], t_out * pool, ch)
    return dx


def maxpool1d_forward(x, pool: int):
    return maxpool1d_fwd(x, pool)[0]


# -- GRU / BiGRU -------------------------------------------------------------

def _gru_direction(seq, W, U, b, act, reverse):
    """One GRU pass.  W: (3, H, C), U: (3, H, H), b: (3, H), gate order z, r, h."""
    T = seq.shape[-2]
    H = U.shape[-1]
    h = np.zeros((*seq.shape[:-2], H))
    outs = np.zeros((*seq.shape[:-2], T, H))
    steps = []
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        x = seq[..., t, :]
        z = sigmoid(x @ W[0].T + h @ U[0].T + b[0])
        r = sigmoid(x @ W[1].T + h @ U[1].T + b[1])
        a_h = x @ W[2].T + (r * h) @ U[2].T + b[2]
        cand = activate(act, a_h)
        h_new = (1.0 - z) * h + z * cand
        steps.append((t, x, h, z, r, a_h, cand))
        outs[..., t, :] = h_new
        h = h_new
    return outs, steps


def _gru_direction_bwd(dout, steps, W, U, act, seq_shape):
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[:2])
    dalpha = 0.0
    dseq = np.zeros(seq_shape)
    dh_next = np.zeros(dout.shape[:-2] + dout.shape[-1:])
    flat = lambda a: a.reshape(-1, a.shape[-1])  # noqa: E731
    for t, x, h_prev, z, r, a_h, cand in reversed(steps):
        dh = dout[..., t, :] + dh_next
        dz = dh * (cand - h_prev)
        dcand = dh * z
        dh_prev = dh * (1.0 - z)

        da_h = dcand * activate_grad(act, a_h)
        if act.learnable:
            dalpha += np.sum(dcand * activate_alpha_grad(act, a_h))
        rh = r * h_prev
        drh = da_h @ U[2]
        dr = drh * h_prev
        dh_prev += drh * r
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)

        fx, fh = flat(x), flat(h_prev)
        for g, da in enumerate((da_z, da_r, da_h)):
            fda = flat(da)
            dW[g] += fda.T @ fx
            db[g] += fda.sum(axis=0)
            dU[g] += fda.T @ (flat(rh) if g == 2 else fh)
        dh_prev += da_r @ U[1] + da_z @ U[0]
        dseq[..., t, :] += da_z @ W[0] + da_r @ W[1] + da_h @ W[2]
        dh_next = dh_prev
    return dseq, dW, dU, db, dalpha


def bigru_fwd(seq, params, units, candidate_act):
    """Bidirectional GRU.  seq: (..., T, C) -> (..., T, 2*units), [forward | backward].

    ``params`` maps ``fwd.W, fwd.U, fwd.b, bwd.W, bwd.U, bwd.b``.  Gates use
    the logistic sigmoid; only the candidate state uses ``candidate_act``.
    """
    seq = np.asarray(seq, dtype=np.float64)
    act = as_kind(candidate_act)
    _require(seq.ndim >= 2 and seq.shape[-2] >= 1, f"bigru input must be [..., T>=1, ch], got {seq.shape}")
    ch = seq.shape[-1]
    outs, caches = [], []
    for direction in ("fwd", "bwd"):
        W, U, b = (np.asarray(params[f"{direction}.{n}"], dtype=np.float64) for n in "WUb")
        _require(
            W.shape == (3, units, ch) and U.shape == (3, units, units) and b.shape == (3, units),
            f"bigru {direction} parameter shapes {W.shape}, {U.shape}, {b.shape} do not match units={units}, ch={ch}",
        )
        out, steps = _gru_direction(seq, W, U, b, act, reverse=direction == "bwd")
        outs.append(out)
        caches.append((steps, W, U))
    return np.concatenate(outs, axis=-1), (seq.shape, units, act, caches)


def bigru_bwd(dout, cache):
    seq_shape, units, act, caches = cache
    dseq = np.zeros(seq_shape)
    grads = {}
    dalpha = 0.0
    for direction, (steps, W, U), half in zip(("fwd", "bwd"), caches, (slice(0, units), slice(units, 2 * units))):
        ds, dW, dU, db, da = _gru_direction_bwd(dout[..., half], steps, W, U, act, seq_shape)
        dseq += ds
        grads[f"{direction}.W"], grads[f"{direction}.U"], grads[f"{direction}.b"] = dW, dU, db
        dalpha += da
    if act.learnable:
        grads["alpha"] = np.array([dalpha])
    return dseq, grads


def bigru_forward(seq, params, units, candidate_act):
    return bigru_fwd(seq, params, units, candidate_act)[0]


# -- Dense / GAP -------------------------------------------------------------

def dense_fwd(x, W, b, act):
    """act(W x + b).  x: (..., n), W: (m, n), b: (m,)."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    act = as_kind(act)
    _require(W.ndim == 2 and x.shape[-1] == W.shape[1] and b.shape == (W.shape[0],),
             f"dense shapes x{x.shape} W{W.shape} b{b.shape} disagree")
    pre = x @ W.T + b
    return activate(act, pre), (x, W, pre, act)


def dense_bwd(dout, cache):
    x, W, pre, act = cache
    dpre = dout * activate_grad(act, pre)
    fx = x.reshape(-1, x.shape[-1])
    fd = dpre.reshape(-1, dpre.shape[-1])
    grads = {"W": fd.T @ fx, "b": fd.sum(axis=0)}
    if act.learnable:
        grads["alpha"] = np.array([np.sum(dout * activate_alpha_grad(act, pre))])
    return dpre @ W, grads


def dense_forward(x, W, b, act):
    return dense_fwd(x, W, b, act)[0]


def global_average_pool(seq):
    """Per-channel mean over the time axis.  (..., T, C) -> (..., C)."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim < 2 or seq.shape[-2] == 0:
        raise ShapeError("global average pool needs at least one time step")
    return seq.mean(axis=-2)


def global_average_pool_bwd(dout, T):
    return np.repeat(dout[..., None, :] / T, T, axis=-2)


__all__ = [
    "ActivationKind",
    "conv1d_forward",
    "maxpool1d_forward",
    "bigru_forward",
    "dense_forward",
    "global_average_pool",
]
