"""Supervised world model: a small tanh MLP predicting (next state, reward).

The network maps the concatenation of state and action through zero or
more tanh hidden layers to a linear output of width ``state_dim + 1``; the
first ``state_dim`` outputs are the next-state head, the last one the
reward head. Training is full-batch gradient descent on the joint mean
squared error

    loss = mean over transitions of
           (||next_state_pred - next_state||^2 + (reward_pred - reward)^2)
           / (state_dim + 1)

which equals the plain MSE over all output entries, so loss values are
comparable across datasets of different sizes. Gradients come from exact
backpropagation and can be audited against central finite differences via
:func:`gradient_check`.

Any object with the same ``train_step`` / ``evaluate`` / ``predict``
surface (see :class:`WorldModel`) plugs into the experiment loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .buffers import Transition, stack_batch
from .errors import ConfigError, DimensionError, DivergenceError, EmptyBufferError


class WorldModel(Protocol):
    """Contract the experiment loop relies on.

    ``evaluate`` must be pure: no parameter mutation, and deterministic
    for fixed parameters and input order.
    """

    def train_step(self, batch: Sequence[Transition], learning_rate: float) -> float: ...

    def evaluate(self, transitions: Sequence[Transition]) -> "LossReport": ...

    def predict(self, state: np.ndarray, action: np.ndarray): ...


@dataclass(frozen=True)
class LossReport:
    """Mean loss over ``num_examples`` transitions."""

    value: float
    num_examples: int


class MlpWorldModel:
    """Fully-connected predictor with deterministic per-seed initialization.

    Weights are drawn uniformly from ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``,
    biases start at zero. The architecture is fixed after construction;
    ``weights`` and ``biases`` are plain numpy arrays updated in place by
    ``train_step``.
    """

    def __init__(self, state_dim: int, action_dim: int, hidden_sizes: Sequence[int], seed: int):
        if state_dim < 1:
            raise ConfigError(f"state_dim must be positive, got {state_dim}")
        if action_dim < 1:
            raise ConfigError(f"action_dim must be positive, got {action_dim}")
        if any(h < 1 for h in hidden_sizes):
            raise ConfigError(f"hidden sizes must be positive, got {tuple(hidden_sizes)}")
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.seed = int(seed)

        dims = [self.state_dim + self.action_dim, *self.hidden_sizes, self.state_dim + 1]
        rng = np.random.default_rng(self.seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    # ------------------------------------------------------------------
    # forward / prediction
    # ------------------------------------------------------------------
    def _forward(self, x: np.ndarray) -> list[np.ndarray]:
        """Activations per layer; last entry is the linear output."""
        acts = [x]
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = z if i == last else np.tanh(z)
            acts.append(a)
        return acts

    def predict(self, state: np.ndarray, action: np.ndarray):
        """Forward pass for a single (state, action) pair or a batch.

        Returns ``(next_state_pred, reward_pred)``; shapes follow the
        input (vector in, vector out; matrix in, matrix out).
        """
        state = np.asarray(state, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64)
        single = state.ndim == 1
        s = np.atleast_2d(state)
        a = np.atleast_2d(action)
        if s.shape[1] != self.state_dim or a.shape[1] != self.action_dim:
            raise DimensionError(
                f"expected dims ({self.state_dim}, {self.action_dim}), "
                f"got ({s.shape[1]}, {a.shape[1]})"
            )
        out = self._forward(np.concatenate([s, a], axis=1))[-1]
        next_state = out[:, : self.state_dim]
        reward = out[:, self.state_dim]
        if single:
            return next_state[0], float(reward[0])
        return next_state, reward

    # ------------------------------------------------------------------
    # loss / training
    # ------------------------------------------------------------------
    def loss(self, transitions: Sequence[Transition]) -> LossReport:
        """Mean joint MSE over ``transitions``; pure, order-deterministic."""
        if len(transitions) == 0:
            raise EmptyBufferError("loss requires at least one transition")
        states, actions, targets = stack_batch(list(transitions))
        out = self._forward(np.concatenate([states, actions], axis=1))[-1]
        value = float(np.mean((out - targets) ** 2))
        return LossReport(value=value, num_examples=len(transitions))

    def evaluate(self, transitions: Sequence[Transition]) -> LossReport:
        return self.loss(transitions)

    def _gradients(self, states, actions, targets):
        """Backprop gradients of the mean joint MSE; returns (loss, dWs, dbs)."""
        x = np.concatenate([states, actions], axis=1)
        acts = self._forward(x)
        out = acts[-1]
        n, d_out = out.shape
        loss = float(np.mean((out - targets) ** 2))

        delta = 2.0 * (out - targets) / (n * d_out)
        d_weights = [np.empty(0)] * len(self.weights)
        d_biases = [np.empty(0)] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            d_weights[i] = acts[i].T @ delta
            d_biases[i] = delta.sum(axis=0)
            if i > 0:
                # tanh'(z) expressed through the activation itself
                delta = (delta @ self.weights[i].T) * (1.0 - acts[i] ** 2)
        return loss, d_weights, d_biases

    def train_step(self, batch: Sequence[Transition], learning_rate: float) -> float:
        """One full-batch gradient descent step; returns the pre-step loss.

        A non-finite loss or gradient aborts the update and raises
        DivergenceError, leaving parameters untouched.
        """
        if len(batch) == 0:
            raise EmptyBufferError("train_step requires a non-empty batch")
        if learning_rate < 0:
            raise ConfigError(f"learning_rate must be nonnegative, got {learning_rate}")
        states, actions, targets = stack_batch(list(batch))
        # divergence is detected below, so let inf/nan flow through silently
        with np.errstate(invalid="ignore", over="ignore"):
            loss, d_weights, d_biases = self._gradients(states, actions, targets)
        if not np.isfinite(loss) or not all(
            np.all(np.isfinite(g)) for g in (*d_weights, *d_biases)
        ):
            raise DivergenceError("non-finite loss or gradient; update skipped")
        for w, b, dw, db in zip(self.weights, self.biases, d_weights, d_biases):
            w -= learning_rate * dw
            b -= learning_rate * db
        return loss

    def clone(self) -> "MlpWorldModel":
        other = MlpWorldModel(self.state_dim, self.action_dim, self.hidden_sizes, self.seed)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other


def gradient_check(model: MlpWorldModel, batch: Sequence[Transition], eps: float = 1e-5) -> float:
    """Max relative error of backprop vs central finite differences.

    Perturbs every parameter by +-eps, so this is only meant for small
    verification models. The relative error for a pair of gradients g_fd,
    g_bp is |g_fd - g_bp| / max(|g_fd|, |g_bp|, 1e-8).
    """
    if not (0 < eps <= 1e-3):
        raise ConfigError(f"eps must be in (0, 1e-3], got {eps}")
    states, actions, targets = stack_batch(list(batch))
    _, d_weights, d_biases = model._gradients(states, actions, targets)

    def batch_loss() -> float:
        out = model._forward(np.concatenate([states, actions], axis=1))[-1]
        return float(np.mean((out - targets) ** 2))

    max_err = 0.0
    for arr, grad in zip((*model.weights, *model.biases), (*d_weights, *d_biases)):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = batch_loss()
            flat[j] = orig - eps
            down = batch_loss()
            flat[j] = orig
            g_fd = (up - down) / (2.0 * eps)
            denom = max(abs(g_fd), abs(gflat[j]), 1e-8)
            max_err = max(max_err, abs(g_fd - gflat[j]) / denom)
    return max_err
