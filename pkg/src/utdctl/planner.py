"""Random-shooting model-predictive planner.

Samples candidate action sequences uniformly within the action bounds,
rolls each through the model's predicted dynamics accumulating predicted
reward, and executes the first action of the best sequence. Ties go to
the lowest candidate index, so planning is deterministic given the rng.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def plan_action(model, state: np.ndarray, horizon: int, n_candidates: int,
                rng: np.random.Generator,
                action_bounds: tuple[float, float]) -> np.ndarray:
    """First action of the highest-predicted-return candidate sequence.

    Works with any model exposing ``predict(states, actions)`` on
    batches, trained or not. Returns an array of shape (action_dim,).
    """
    if horizon < 1:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    if n_candidates < 1:
        raise ConfigError(f"n_candidates must be positive, got {n_candidates}")
    lo, hi = action_bounds
    if lo > hi:
        raise ConfigError(f"action_bounds out of order: ({lo}, {hi})")

    action_dim = model.action_dim
    sequences = rng.uniform(lo, hi, size=(n_candidates, horizon, action_dim))
    states = np.tile(np.asarray(state, dtype=np.float64), (n_candidates, 1))
    totals = np.zeros(n_candidates)
    for h in range(horizon):
        states, rewards = model.predict(states, sequences[:, h, :])
        totals += rewards
    best = int(np.argmax(totals))
    return sequences[best, 0, :].copy()
