"""Vectorized numpy kernels: the fallback backend.

Same contract as the compiled extension in _fastnet.pyx; selected at
import time by _backend when the extension is unavailable or when
JITMINER_BACKEND=python.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(weights, biases, X):
    """Probabilities for a batch: ReLU hidden layers, sigmoid output."""
    a = X
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        a = _sigmoid(z) if i == last else np.maximum(z, 0.0)
    return a[:, 0]


def loss_and_grads(weights, biases, X, y, beta):
    """Mean smooth-L1 loss and its exact gradients for every parameter."""
    n = X.shape[0]
    last = len(weights) - 1
    activations = [X]
    zs = []
    a = X
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        zs.append(z)
        a = _sigmoid(z) if i == last else np.maximum(z, 0.0)
        activations.append(a)
    pred = activations[-1][:, 0]
    d = pred - y
    abs_d = np.abs(d)
    small = abs_d < beta
    loss = float(np.mean(np.where(small, 0.5 * d * d / beta, abs_d - 0.5 * beta)))

    dl_dpred = np.where(small, d / beta, np.sign(d)) / n
    delta = (dl_dpred * pred * (1.0 - pred))[:, None]
    grad_w = [np.empty(0)] * len(weights)
    grad_b = [np.empty(0)] * len(biases)
    for i in range(last, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (zs[i - 1] > 0.0)
    return loss, grad_w, grad_b


def adam_update(param, grad, m, v, t, lr, b1, b2, eps):
    """One bias-corrected Adam step on a single tensor, in place."""
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def train_loop(weights, biases, X, y, m_w, v_w, m_b, v_b,
               start_step, epochs, lr, b1, b2, eps, beta):
    """Full-batch epochs of gradient + Adam; losses are pre-update values."""
    losses = np.empty(epochs)
    for epoch in range(epochs):
        loss, grad_w, grad_b = loss_and_grads(weights, biases, X, y, beta)
        losses[epoch] = loss
        t = start_step + epoch + 1
        for i in range(len(weights)):
            adam_update(weights[i], grad_w[i], m_w[i], v_w[i], t, lr, b1, b2, eps)
            adam_update(biases[i], grad_b[i], m_b[i], v_b[i], t, lr, b1, b2, eps)
    return losses
