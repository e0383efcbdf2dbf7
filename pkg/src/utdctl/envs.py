"""Toy environments for the testbed.

Two data sources exercise the ratio controller end to end:

* :class:`PendulumEnv`, a torque-limited swing-up task with optional
  process noise. States are the trig embedding ``[cos(angle),
  sin(angle), angular_velocity / max_speed]`` so the dynamics the world
  model sees are smooth (no angle-wrap discontinuity).
* :class:`DriftingStream`, a supervised regression stream whose input
  distribution mean moves linearly with the step count. It emits
  ordinary transitions (with a zero action) so the same buffers, model,
  and controller run unchanged.

Environments are stateless: ``step`` is a pure function of (state,
action, rng draw), and episode bookkeeping lives in the caller.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .buffers import Transition
from .errors import ConfigError
from .model import MlpWorldModel


class EnvContract(Protocol):
    """Interface the experiment loop and planner rely on."""

    state_dim: int
    action_dim: int
    action_bounds: tuple[float, float]
    horizon: int

    def reset(self, rng: np.random.Generator) -> np.ndarray: ...

    def step(
        self, state: np.ndarray, action: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, float, bool]: ...


class PendulumEnv:
    """Classic underactuated pendulum, reward peaks at the upright pose.

    Reward is -(angle^2 + 0.1*velocity^2 + 0.001*torque^2) with the angle
    wrapped to [-pi, pi], so every reward is <= 0 and an episode return
    lives in (-inf, 0]. Process noise (std ``noise_std``) perturbs the
    angular velocity each step; set it to 0 for deterministic rollouts.
    """

    state_dim = 3
    action_dim = 1
    action_bounds = (-2.0, 2.0)

    def __init__(self, noise_std: float = 0.05, horizon: int = 200, *,
                 gravity: float = 10.0, mass: float = 1.0, length: float = 1.0,
                 dt: float = 0.05, max_speed: float = 8.0):
        if noise_std < 0:
            raise ConfigError(f"noise_std must be nonnegative, got {noise_std}")
        if horizon < 1:
            raise ConfigError(f"horizon must be positive, got {horizon}")
        self.noise_std = float(noise_std)
        self.horizon = int(horizon)
        self.gravity = float(gravity)
        self.mass = float(mass)
        self.length = float(length)
        self.dt = float(dt)
        self.max_speed = float(max_speed)

    def _encode(self, theta: np.ndarray, omega: np.ndarray) -> np.ndarray:
        return np.stack(
            [np.cos(theta), np.sin(theta), omega / self.max_speed], axis=-1
        )

    @staticmethod
    def _decode(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        theta = np.arctan2(states[..., 1], states[..., 0])
        return theta, states[..., 2]

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        theta = rng.uniform(-np.pi, np.pi)
        omega = rng.uniform(-1.0, 1.0)
        return self._encode(np.float64(theta), np.float64(omega))

    def mean_step(self, states: np.ndarray, actions: np.ndarray):
        """Noiseless dynamics on a batch; returns (next_states, rewards).

        Shapes: states (n, 3), actions (n, 1) -> ((n, 3), (n,)).
        """
        theta, scaled_omega = self._decode(np.atleast_2d(states))
        omega = scaled_omega * self.max_speed
        torque = np.clip(np.atleast_2d(actions)[:, 0], *self.action_bounds)

        # wrap happens via arctan2 in _decode, so theta is already in [-pi, pi]
        reward = -(theta**2 + 0.1 * omega**2 + 0.001 * torque**2)
        accel = (
            3.0 * self.gravity / (2.0 * self.length) * np.sin(theta)
            + 3.0 / (self.mass * self.length**2) * torque
        )
        new_omega = np.clip(omega + accel * self.dt, -self.max_speed, self.max_speed)
        new_theta = theta + new_omega * self.dt
        return self._encode(new_theta, new_omega), reward

    def step(self, state: np.ndarray, action: np.ndarray, rng: np.random.Generator):
        noise = rng.normal(0.0, self.noise_std) if self.noise_std > 0 else 0.0
        theta, scaled_omega = self._decode(np.asarray(state, dtype=np.float64))
        omega = scaled_omega * self.max_speed
        torque = float(np.clip(np.asarray(action, dtype=np.float64).reshape(-1)[0],
                               *self.action_bounds))

        reward = -(float(theta) ** 2 + 0.1 * omega**2 + 0.001 * torque**2)
        accel = (
            3.0 * self.gravity / (2.0 * self.length) * np.sin(theta)
            + 3.0 / (self.mass * self.length**2) * torque
        )
        new_omega = float(np.clip(omega + accel * self.dt + noise,
                                  -self.max_speed, self.max_speed))
        new_theta = float(theta) + new_omega * self.dt
        next_state = self._encode(np.float64(new_theta), np.float64(new_omega))
        return next_state, float(reward), False


class TrueDynamicsModel:
    """Adapter exposing an env's noiseless dynamics as a world model.

    Lets the planner run against the ground-truth transition function,
    which is the oracle reference policy for score normalization.
    """

    def __init__(self, env):
        if not hasattr(env, "mean_step"):
            raise ConfigError(f"env {type(env).__name__} has no mean_step")
        self.env = env
        self.state_dim = env.state_dim
        self.action_dim = env.action_dim

    def predict(self, state: np.ndarray, action: np.ndarray):
        state = np.asarray(state, dtype=np.float64)
        single = state.ndim == 1
        next_states, rewards = self.env.mean_step(
            np.atleast_2d(state), np.atleast_2d(action)
        )
        if single:
            return next_states[0], float(rewards[0])
        return next_states, rewards


class DriftingStream:
    """Supervised regression stream with a linearly drifting input mean.

    Targets come from a fixed randomly-initialized teacher network; the
    learner sees transitions whose ``state`` is the input, ``next_state``
    and ``reward`` are the noisy teacher outputs, and ``action`` is a
    zero placeholder. ``max_train_samples`` caps how many training
    transitions the stream ever emits (0 = unlimited); validation draws
    are never capped and never count against the cap.
    """

    action_dim = 1

    def __init__(self, state_dim: int, teacher_hidden: tuple[int, ...],
                 teacher_seed: int, *, drift_per_step: float = 0.0,
                 noise_std: float = 0.0, samples_per_step: int = 1,
                 max_train_samples: int = 0, teacher_gain: float = 2.0):
        if state_dim < 1:
            raise ConfigError(f"state_dim must be positive, got {state_dim}")
        if noise_std < 0:
            raise ConfigError(f"noise_std must be nonnegative, got {noise_std}")
        if samples_per_step < 1:
            raise ConfigError(
                f"samples_per_step must be positive, got {samples_per_step}"
            )
        if max_train_samples < 0:
            raise ConfigError(
                f"max_train_samples must be nonnegative, got {max_train_samples}"
            )
        if not np.isfinite(drift_per_step):
            raise ConfigError(f"drift_per_step must be finite, got {drift_per_step}")
        self.state_dim = int(state_dim)
        self.drift_per_step = float(drift_per_step)
        self.noise_std = float(noise_std)
        self.samples_per_step = int(samples_per_step)
        self.max_train_samples = int(max_train_samples)
        self.teacher = MlpWorldModel(state_dim, 1, teacher_hidden, seed=teacher_seed)
        for w in self.teacher.weights:
            w *= teacher_gain
        self._emitted = 0

    def _draw(self, step: int, n: int, rng: np.random.Generator) -> list[Transition]:
        mean = self.drift_per_step * step
        xs = rng.normal(mean, 1.0, size=(n, self.state_dim))
        zeros = np.zeros((n, 1))
        ys, rs = self.teacher.predict(xs, zeros)
        if self.noise_std > 0:
            ys = ys + rng.normal(0.0, self.noise_std, size=ys.shape)
            rs = rs + rng.normal(0.0, self.noise_std, size=rs.shape)
        return [
            Transition(xs[i], zeros[i], float(rs[i]), ys[i], False)
            for i in range(n)
        ]

    def emit(self, step: int, rng: np.random.Generator) -> list[Transition]:
        """Training samples for one step; empty once the cap is exhausted."""
        n = self.samples_per_step
        if self.max_train_samples > 0:
            n = min(n, self.max_train_samples - self._emitted)
        if n <= 0:
            return []
        self._emitted += n
        return self._draw(step, n, rng)

    def draw_validation(self, step: int, n: int, rng: np.random.Generator):
        return self._draw(step, n, rng)
