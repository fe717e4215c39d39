"""Feed-forward network: sigmoid hidden layers, softmax output, cross-entropy
loss, mini-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax


@dataclass(eq=False)
class NNModel:
    weights: list
    biases: list
    learning_rate: float = 0.1
    epochs: int = 200
    loss_trace: list = field(default_factory=list)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def predict_proba(self, X) -> np.ndarray:
        acts = _forward(self.weights, self.biases, np.atleast_2d(np.asarray(X, dtype=float)))
        return np.exp(log_softmax(acts[-1], axis=1))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1


def _forward(weights, biases, X):
    """Hidden activations followed by the output logits."""
    acts = [X]
    for W, b in zip(weights[:-1], biases[:-1]):
        acts.append(expit(acts[-1] @ W + b))
    acts.append(acts[-1] @ weights[-1] + biases[-1])
    return acts


def loss_and_gradients(weights, biases, X, Y):
    """Mean cross-entropy against one-hot ``Y`` and its gradients."""
    acts = _forward(weights, biases, X)
    logp = log_softmax(acts[-1], axis=1)
    loss = -np.sum(Y * logp) / X.shape[0]
    delta = (np.exp(logp) - Y) / X.shape[0]
    gW = [None] * len(weights)
    gb = [None] * len(weights)
    for layer in range(len(weights) - 1, -1, -1):
        gW[layer] = acts[layer].T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer:
            h = acts[layer]
            delta = (delta @ weights[layer].T) * h * (1 - h)
    return loss, gW, gb


def init_params(layer_sizes, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def fit_nn(
    X,
    y,
    hidden=(30,),
    learning_rate: float = 0.1,
    epochs: int = 200,
    batch_size: int = 32,
    seed: int = 0,
    n_classes: int = 3,
) -> NNModel:
    """Train by plain gradient descent (w <- w - lr * dL/dw) over shuffled
    mini-batches. ``loss_trace`` records the full-data loss after each epoch.
    Raises FloatingPointError if the loss stops being finite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    hidden = [int(h) for h in np.atleast_1d(hidden)]
    if not hidden or min(hidden) < 1:
        raise ValueError("hidden layer sizes must be >= 1")
    if learning_rate < 0:
        raise ValueError("learning rate must be non-negative")
    rng = np.random.default_rng(seed)
    weights, biases = init_params([X.shape[1], *hidden, n_classes], rng)
    Y = np.eye(n_classes)[y - 1]
    n = X.shape[0]
    trace = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, gW, gb = loss_and_gradients(weights, biases, X[idx], Y[idx])
            for W, b, dW, db in zip(weights, biases, gW, gb):
                W -= learning_rate * dW
                b -= learning_rate * db
        loss, _, _ = loss_and_gradients(weights, biases, X, Y)
        trace.append(float(loss))
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss; trace so far: {trace}")
    return NNModel(weights, biases, learning_rate, epochs, trace)
