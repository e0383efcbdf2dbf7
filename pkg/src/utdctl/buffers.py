"""Capacity-bounded transition storage.

Two buffers with distinct roles share the same FIFO ring: the replay
buffer feeds training batches, the validation buffer is held out and read
back in insertion order for deterministic loss evaluation. Disjointness
between the two is enforced at the collection site (a transition is pushed
to exactly one of them), not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, EmptyBufferError


@dataclass
class Transition:
    """One environment step: (state, action, reward, next_state, terminal)."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=np.float64)
        self.action = np.asarray(self.action, dtype=np.float64)
        self.next_state = np.asarray(self.next_state, dtype=np.float64)
        self.reward = float(self.reward)
        self.terminal = bool(self.terminal)

    def check_valid(self) -> None:
        if self.state.ndim != 1 or self.next_state.ndim != 1 or self.action.ndim != 1:
            raise DimensionError("state, action and next_state must be 1-D vectors")
        if self.state.shape != self.next_state.shape:
            raise DimensionError(
                f"state dim {self.state.shape[0]} != next_state dim {self.next_state.shape[0]}"
            )
        if not (
            np.all(np.isfinite(self.state))
            and np.all(np.isfinite(self.action))
            and np.isfinite(self.reward)
            and np.all(np.isfinite(self.next_state))
        ):
            raise DimensionError("transition contains non-finite entries")


class _RingBuffer:
    """FIFO ring of transitions; oldest entry is evicted at capacity."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError(f"buffer capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self._items: list[Transition] = []
        self._next = 0  # overwrite position once full
        self._state_dim: int | None = None
        self._action_dim: int | None = None

    def __len__(self) -> int:
        return len(self._items)

    def push(self, t: Transition) -> None:
        t.check_valid()
        if self._state_dim is None:
            self._state_dim = t.state.shape[0]
            self._action_dim = t.action.shape[0]
        elif t.state.shape[0] != self._state_dim or t.action.shape[0] != self._action_dim:
            raise DimensionError(
                f"transition dims ({t.state.shape[0]}, {t.action.shape[0]}) do not match "
                f"buffer dims ({self._state_dim}, {self._action_dim})"
            )
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._next] = t
            self._next = (self._next + 1) % self.capacity

    def in_order(self) -> list[Transition]:
        """All stored transitions, oldest first."""
        if len(self._items) < self.capacity:
            return list(self._items)
        return self._items[self._next :] + self._items[: self._next]


class ReplayBuffer(_RingBuffer):
    """Training store; batches are sampled uniformly with replacement."""

    def sample_batch(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if n < 1:
            raise ConfigError(f"batch size must be positive, got {n}")
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]


class ValidationBuffer(_RingBuffer):
    """Held-out store; never sampled, always evaluated in insertion order."""

    def validation_pass(self) -> list[Transition]:
        return self.in_order()


def stack_batch(batch: list[Transition]):
    """Stack a batch into (states, actions, targets) design matrices.

    Targets concatenate next_state and reward, matching the world model's
    output layout.
    """
    if not batch:
        raise EmptyBufferError("cannot stack an empty batch")
    states = np.stack([t.state for t in batch])
    actions = np.stack([t.action for t in batch])
    targets = np.concatenate(
        [
            np.stack([t.next_state for t in batch]),
            np.array([[t.reward] for t in batch]),
        ],
        axis=1,
    )
    return states, actions, targets
