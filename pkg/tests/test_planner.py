"""Random-shooting planner against stub models and enumeration oracles."""

import numpy as np
import pytest

from utdctl.envs import PendulumEnv, TrueDynamicsModel
from utdctl.errors import ConfigError
from utdctl.planner import plan_action


class ForcedRng:
    """Stands in for a Generator; hands the planner a fixed candidate set."""

    def __init__(self, sequences):
        self.sequences = np.asarray(sequences, dtype=np.float64)

    def uniform(self, low, high, size):
        assert size == self.sequences.shape
        return self.sequences.copy()


class QuadraticRewardModel:
    """Static states; reward -(a - 0.3)^2 known perfectly."""

    action_dim = 1

    def predict(self, states, actions):
        return states, -((np.asarray(actions)[:, 0] - 0.3) ** 2)


class DecayDynamics:
    """Deterministic toy chain: x' = 0.9 x + a, reward -(x - 1)^2."""

    action_dim = 1

    def predict(self, states, actions):
        rewards = -((states[:, 0] - 1.0) ** 2)
        nxt = 0.9 * states + np.asarray(actions)
        return nxt, rewards


class ZeroModel:
    def __init__(self, action_dim=1):
        self.action_dim = action_dim

    def predict(self, states, actions):
        return states, np.zeros(len(states))


def test_perfect_reward_model_picks_best_candidate():
    # candidates 0.0, 0.3, 1.0 at horizon 1: the middle one is optimal
    rng = ForcedRng(np.array([0.0, 0.3, 1.0]).reshape(3, 1, 1))
    action = plan_action(QuadraticRewardModel(), np.zeros(2), horizon=1,
                         n_candidates=3, rng=rng, action_bounds=(-2.0, 2.0))
    assert action.shape == (1,)
    assert action[0] == 0.3


def test_single_candidate_returned_unconditionally():
    rng_a = np.random.default_rng(17)
    expected = rng_a.uniform(-2.0, 2.0, size=(1, 4, 1))
    rng_b = np.random.default_rng(17)
    action = plan_action(ZeroModel(), np.zeros(3), horizon=4, n_candidates=1,
                         rng=rng_b, action_bounds=(-2.0, 2.0))
    assert np.array_equal(action, expected[0, 0])


def test_matches_exhaustive_enumeration_at_horizon_three():
    model = DecayDynamics()
    state = np.array([4.0, -2.0])
    n, horizon = 25, 3
    seqs = np.random.default_rng(42).uniform(-1.0, 1.0, size=(n, horizon, 1))

    # independent oracle: score every candidate one step at a time
    totals = []
    for i in range(n):
        x = state.copy()
        total = 0.0
        for h in range(horizon):
            nxt, reward = model.predict(x[None, :], seqs[i, h][None, :])
            total += float(reward[0])
            x = nxt[0]
        totals.append(total)
    best = int(np.argmax(totals))

    action = plan_action(model, state, horizon=horizon, n_candidates=n,
                         rng=np.random.default_rng(42), action_bounds=(-1.0, 1.0))
    assert np.array_equal(action, seqs[best, 0])
    # the chosen first action must be strictly better than the worst one
    assert totals[best] > min(totals)


def test_enumeration_oracle_on_true_pendulum_dynamics():
    env = PendulumEnv(noise_std=0.0)
    model = TrueDynamicsModel(env)
    state = env.reset(np.random.default_rng(3))
    n, horizon = 12, 5
    seqs = np.random.default_rng(99).uniform(-2.0, 2.0, size=(n, horizon, 1))

    totals = np.zeros(n)
    for i in range(n):
        x = state.copy()
        for h in range(horizon):
            nxt, reward = env.mean_step(x[None, :], seqs[i, h][None, :])
            totals[i] += float(reward[0])
            x = nxt[0]

    action = plan_action(model, state, horizon=horizon, n_candidates=n,
                         rng=np.random.default_rng(99), action_bounds=(-2.0, 2.0))
    assert np.array_equal(action, seqs[int(np.argmax(totals)), 0])


def test_all_tied_candidates_break_to_lowest_index():
    seqs = np.random.default_rng(1).uniform(-2.0, 2.0, size=(6, 2, 1))
    action = plan_action(ZeroModel(), np.zeros(3), horizon=2, n_candidates=6,
                         rng=ForcedRng(seqs), action_bounds=(-2.0, 2.0))
    assert np.array_equal(action, seqs[0, 0])


def test_action_respects_bounds_and_dim():
    model = ZeroModel(action_dim=2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        action = plan_action(model, np.zeros(3), horizon=3, n_candidates=5,
                             rng=rng, action_bounds=(-0.5, 0.25))
        assert action.shape == (2,)
        assert np.all(action >= -0.5) and np.all(action <= 0.25)


def test_deterministic_per_rng_and_state_untouched():
    env = PendulumEnv(noise_std=0.0)
    model = TrueDynamicsModel(env)
    state = env.reset(np.random.default_rng(8))
    before = state.copy()
    a = plan_action(model, state, 4, 10, np.random.default_rng(5), (-2.0, 2.0))
    b = plan_action(model, state, 4, 10, np.random.default_rng(5), (-2.0, 2.0))
    assert np.array_equal(a, b)
    assert np.array_equal(state, before)


def test_untrained_model_still_plans():
    from utdctl.model import MlpWorldModel

    model = MlpWorldModel(3, 1, (8,), seed=0)
    action = plan_action(model, np.zeros(3), horizon=3, n_candidates=4,
                         rng=np.random.default_rng(2), action_bounds=(-2.0, 2.0))
    assert action.shape == (1,)
    assert np.all(np.isfinite(action))


@pytest.mark.parametrize("horizon,n_candidates,bounds", [
    (0, 4, (-1.0, 1.0)),
    (3, 0, (-1.0, 1.0)),
    (3, 4, (1.0, -1.0)),
])
def test_invalid_arguments_rejected(horizon, n_candidates, bounds):
    with pytest.raises(ConfigError):
        plan_action(ZeroModel(), np.zeros(3), horizon, n_candidates,
                    np.random.default_rng(0), bounds)
