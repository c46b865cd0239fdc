"""Non-graph layers, losses and the Adam optimiser."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .autograd import Tensor
from .exceptions import AllLabelsMissing, DimensionMismatch, NonFiniteGradient

CLASSIFICATION = "classification"
REGRESSION = "regression"


def dense_init(rng, d_in, d_out):
    bound = 1.0 / np.sqrt(max(d_in, 1))
    return (Tensor(rng.uniform(-bound, bound, size=(d_in, d_out)), requires_grad=True),
            Tensor(np.zeros(d_out), requires_grad=True))


def autoencode_features(X, enc_params, dec_params):
    """Encode ``X`` as ``tanh(X W_enc + b_enc)`` and decode linearly.

    Returns ``(Z, reconstruction)``.
    """
    X = ag.as_tensor(X)
    W_enc, b_enc = enc_params
    W_dec, b_dec = dec_params
    if X.shape[1] != W_enc.shape[0] or W_dec.shape != (W_enc.shape[1], X.shape[1]):
        raise DimensionMismatch(
            f"autoencoder widths do not match input width {X.shape[1]}")
    Z = ag.tanh(X @ W_enc + b_enc)
    return Z, Z @ W_dec + b_dec


class BatchNorm:
    """Per-channel batch normalisation over all rows of the batch.

    Running statistics follow ``running = momentum * running + (1 -
    momentum) * batch`` and are used in eval mode.
    """

    def __init__(self, width, eps=1e-5, momentum=0.9):
        self.gamma = Tensor(np.ones(width), requires_grad=True)
        self.shift = Tensor(np.zeros(width), requires_grad=True)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.eps = eps
        self.momentum = momentum

    def __call__(self, X: Tensor, training: bool) -> Tensor:
        return batch_norm(X, self.gamma, self.shift, self, training)

    def parameters(self):
        return {"gamma": self.gamma, "shift": self.shift}


def batch_norm(X, gamma, shift, stats, training: bool, update_stats: bool = True) -> Tensor:
    X = ag.as_tensor(X)
    if training:
        mu = X.mean(axis=0, keepdims=True)
        xc = X - mu
        var = (xc * xc).mean(axis=0, keepdims=True)
        if update_stats:
            k = stats.momentum
            stats.running_mean = k * stats.running_mean + (1 - k) * mu.data.ravel()
            stats.running_var = k * stats.running_var + (1 - k) * var.data.ravel()
        xhat = xc / ag.sqrt(var + stats.eps)
    else:
        xhat = (X - stats.running_mean) * (1.0 / np.sqrt(stats.running_var + stats.eps))
    return xhat * gamma + shift


def global_mean_pool(X_V) -> Tensor:
    X_V = ag.as_tensor(X_V)
    return X_V.mean(axis=0, keepdims=True)


def pool_matrix(sizes) -> sp.csr_matrix:
    """``len(sizes) x sum(sizes)`` matrix averaging each graph's rows."""
    sizes = np.asarray(sizes, dtype=np.int64)
    rows = np.repeat(np.arange(len(sizes)), sizes)
    vals = np.repeat(1.0 / sizes, sizes)
    return sp.csr_matrix((vals, (rows, np.arange(sizes.sum()))), shape=(len(sizes), int(sizes.sum())))


def multitask_loss(outputs: Tensor, labels, task_types) -> Tensor:
    """Mean loss over observed labels.

    Classification tasks use sigmoid cross entropy on logits, regression
    tasks squared error. NaN labels are masked out.
    """
    outputs = ag.as_tensor(outputs)
    labels = np.asarray(labels, dtype=np.float64).reshape(outputs.shape)
    if len(task_types) != outputs.shape[1]:
        raise DimensionMismatch(f"{outputs.shape[1]} outputs for {len(task_types)} tasks")
    observed = ~np.isnan(labels)
    if not observed.any():
        raise AllLabelsMissing("every label in the batch is missing")
    y = np.where(observed, labels, 0.0)
    is_cls = np.array([t == CLASSIFICATION for t in task_types])[None, :]
    cls_mask = observed & is_cls
    reg_mask = observed & ~is_cls
    total = Tensor(0.0)
    if cls_mask.any():
        ce = ag.softplus(outputs) - outputs * y
        total = total + ag.where_mask(ce, cls_mask).sum()
    if reg_mask.any():
        diff = outputs - y
        total = total + ag.where_mask(diff * diff, reg_mask).sum()
    return total * (1.0 / observed.sum())


class Adam:
    """Bias-corrected Adam over a name -> Tensor parameter dict."""

    def __init__(self, params: dict, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, grads: dict | None = None):
        if grads is None:
            grads = {k: p.grad for k, p in self.params.items()}
        for k, g in grads.items():
            if g is not None and not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient for parameter {k!r}")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                g = np.zeros_like(p.data)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self):
        return {"t": self.t, "m": self.m, "v": self.v}


def adam_step(params: dict, grads: dict, state: Adam | None = None, lr=0.001,
              beta1=0.9, beta2=0.999, eps=1e-8) -> Adam:
    """Functional wrapper: one Adam update, creating the state on first use."""
    if state is None:
        state = Adam(params, lr, beta1, beta2, eps)
    state.lr = lr
    state.step(grads)
    return state
