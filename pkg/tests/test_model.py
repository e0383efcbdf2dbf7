"""World-model unit tests: init, prediction, loss, backprop, training."""

import numpy as np
import pytest

from utdctl.buffers import Transition
from utdctl.errors import (ConfigError, DimensionError, DivergenceError,
                           EmptyBufferError)
from utdctl.model import MlpWorldModel, gradient_check


def random_batch(rng, n, state_dim, action_dim):
    return [
        Transition(rng.normal(size=state_dim), rng.normal(size=action_dim),
                   float(rng.normal()), rng.normal(size=state_dim), False)
        for _ in range(n)
    ]


def params_equal(a: MlpWorldModel, b: MlpWorldModel) -> bool:
    return all(np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights)) \
        and all(np.array_equal(ba, bb) for ba, bb in zip(a.biases, b.biases))


# ----------------------------------------------------------------------
# initialization
# ----------------------------------------------------------------------

def test_init_is_deterministic_per_seed():
    a = MlpWorldModel(3, 1, (32, 32), seed=7)
    b = MlpWorldModel(3, 1, (32, 32), seed=7)
    assert params_equal(a, b)
    c = MlpWorldModel(3, 1, (32, 32), seed=8)
    assert not params_equal(a, c)


def test_init_fan_in_bounds_and_zero_biases():
    model = MlpWorldModel(4, 2, (16,), seed=0)
    for w in model.weights:
        bound = 1.0 / np.sqrt(w.shape[0])
        assert np.all(np.abs(w) <= bound)
    for b in model.biases:
        assert np.all(b == 0.0)


def test_empty_hidden_is_a_linear_map():
    model = MlpWorldModel(3, 1, (), seed=0)
    assert len(model.weights) == 1
    assert model.weights[0].shape == (4, 4)  # (state+action) -> (state+1)


@pytest.mark.parametrize("state_dim,action_dim,hidden", [
    (0, 1, (8,)), (3, 0, (8,)), (3, 1, (0,)), (3, 1, (8, -2)),
])
def test_invalid_dimensions_rejected(state_dim, action_dim, hidden):
    with pytest.raises(ConfigError):
        MlpWorldModel(state_dim, action_dim, hidden, seed=0)


# ----------------------------------------------------------------------
# prediction
# ----------------------------------------------------------------------

def test_zero_weights_predict_zero():
    model = MlpWorldModel(3, 1, (8,), seed=0)
    for w in model.weights:
        w[:] = 0.0
    next_state, reward = model.predict(np.ones(3), np.ones(1))
    assert np.array_equal(next_state, np.zeros(3))
    assert reward == 0.0


def test_predict_is_deterministic():
    model = MlpWorldModel(3, 2, (16, 16), seed=1)
    state, action = np.arange(3.0), np.arange(2.0)
    a = model.predict(state, action)
    b = model.predict(state, action)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_predict_batched_matches_single():
    model = MlpWorldModel(3, 1, (8,), seed=2)
    rng = np.random.default_rng(0)
    states = rng.normal(size=(5, 3))
    actions = rng.normal(size=(5, 1))
    batch_next, batch_reward = model.predict(states, actions)
    for i in range(5):
        single_next, single_reward = model.predict(states[i], actions[i])
        assert np.allclose(batch_next[i], single_next)
        assert batch_reward[i] == pytest.approx(single_reward)


def test_predict_dimension_mismatch_rejected():
    model = MlpWorldModel(3, 1, (8,), seed=0)
    with pytest.raises(DimensionError):
        model.predict(np.zeros(2), np.zeros(1))
    with pytest.raises(DimensionError):
        model.predict(np.zeros(3), np.zeros(2))


def test_output_perturbation_bounded_by_operator_norms():
    # tanh is 1-Lipschitz, so || f(x+e) - f(x) || <= prod ||W_i||_2 * ||e||
    model = MlpWorldModel(3, 1, (8, 6), seed=3)
    lipschitz = np.prod([np.linalg.norm(w, ord=2) for w in model.weights])
    rng = np.random.default_rng(4)
    state, action = rng.normal(size=3), rng.normal(size=1)
    base_next, base_reward = model.predict(state, action)
    base = np.concatenate([base_next, [base_reward]])
    for _ in range(50):
        eps_vec = rng.normal(size=3) * 1e-3
        pert_next, pert_reward = model.predict(state + eps_vec, action)
        pert = np.concatenate([pert_next, [pert_reward]])
        assert np.linalg.norm(pert - base) <= lipschitz * np.linalg.norm(eps_vec) + 1e-12


# ----------------------------------------------------------------------
# loss
# ----------------------------------------------------------------------

def test_loss_zero_when_model_reproduces_data():
    model = MlpWorldModel(2, 1, (), seed=0)
    model.weights[0][:] = 0.0
    batch = [Transition(np.ones(2), np.ones(1), 0.0, np.zeros(2), False)]
    report = model.loss(batch)
    assert report.value == 0.0
    assert report.num_examples == 1


def test_loss_formula_single_coordinate_off_by_one():
    # state_dim 3: squared error 1 in one output entry over (3+1) entries
    model = MlpWorldModel(3, 1, (), seed=0)
    model.weights[0][:] = 0.0
    batch = [Transition(np.zeros(3), np.zeros(1), 0.0,
                        np.array([1.0, 0.0, 0.0]), False)]
    assert model.loss(batch).value == pytest.approx(0.25)


def test_loss_invariant_under_dataset_duplication():
    model = MlpWorldModel(3, 1, (8,), seed=5)
    batch = random_batch(np.random.default_rng(6), 10, 3, 1)
    once = model.loss(batch).value
    twice = model.loss(batch + batch).value
    assert twice == pytest.approx(once, rel=1e-15)


def test_loss_rejects_empty_input():
    model = MlpWorldModel(3, 1, (8,), seed=0)
    with pytest.raises(EmptyBufferError):
        model.loss([])


def test_evaluate_is_pure():
    model = MlpWorldModel(3, 1, (8, 8), seed=7)
    batch = random_batch(np.random.default_rng(8), 12, 3, 1)
    before = [w.copy() for w in model.weights]
    reports = [model.evaluate(batch) for _ in range(5)]
    assert len({r.value for r in reports}) == 1
    assert all(np.array_equal(w0, w1) for w0, w1 in zip(before, model.weights))


# ----------------------------------------------------------------------
# training
# ----------------------------------------------------------------------

def test_train_step_returns_pre_step_loss():
    model = MlpWorldModel(2, 1, (8,), seed=9)
    batch = random_batch(np.random.default_rng(10), 16, 2, 1)
    before = model.loss(batch).value
    reported = model.train_step(batch, 1e-2)
    assert reported == pytest.approx(before)
    assert model.loss(batch).value < before


def test_linear_least_squares_descent_is_monotone():
    # convex quadratic: small-lr full-batch descent never increases the loss
    model = MlpWorldModel(2, 1, (), seed=11)
    batch = random_batch(np.random.default_rng(12), 32, 2, 1)
    losses = [model.train_step(batch, 0.05) for _ in range(200)]
    losses.append(model.loss(batch).value)
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_zero_learning_rate_leaves_parameters_unchanged():
    model = MlpWorldModel(3, 1, (8,), seed=13)
    reference = MlpWorldModel(3, 1, (8,), seed=13)
    batch = random_batch(np.random.default_rng(14), 8, 3, 1)
    model.train_step(batch, 0.0)
    assert params_equal(model, reference)


def test_negative_learning_rate_rejected():
    model = MlpWorldModel(3, 1, (8,), seed=0)
    batch = random_batch(np.random.default_rng(0), 4, 3, 1)
    with pytest.raises(ConfigError):
        model.train_step(batch, -1e-3)


def test_training_is_deterministic():
    batches = random_batch(np.random.default_rng(15), 64, 3, 2)
    a = MlpWorldModel(3, 2, (16,), seed=16)
    b = MlpWorldModel(3, 2, (16,), seed=16)
    for _ in range(20):
        a.train_step(batches, 1e-2)
        b.train_step(batches, 1e-2)
    assert params_equal(a, b)


def test_divergence_detected_and_update_skipped():
    # poison the linear output layer: a hidden-layer inf would be masked
    # by tanh saturation and is legitimately survivable
    model = MlpWorldModel(2, 1, (4,), seed=17)
    model.weights[-1][0, 0] = np.inf
    snapshot = [w.copy() for w in model.weights]
    batch = random_batch(np.random.default_rng(18), 4, 2, 1)
    with pytest.raises(DivergenceError):
        model.train_step(batch, 1e-2)
    assert all(np.array_equal(s, w) for s, w in zip(snapshot, model.weights))


def test_empty_batch_rejected():
    model = MlpWorldModel(2, 1, (4,), seed=0)
    with pytest.raises(EmptyBufferError):
        model.train_step([], 1e-2)


# ----------------------------------------------------------------------
# gradient verification
# ----------------------------------------------------------------------

def test_linear_model_gradient_matches_closed_form():
    # d/dW mean((XW - Y)^2) = 2 X^T (XW - Y) / (n * d_out), checked via FD
    model = MlpWorldModel(2, 1, (), seed=19)
    rng = np.random.default_rng(20)
    batch = random_batch(rng, 16, 2, 1)
    assert gradient_check(model, batch, eps=1e-6) < 1e-6

    from utdctl.buffers import stack_batch
    states, actions, targets = stack_batch(batch)
    x = np.concatenate([states, actions], axis=1)
    w = model.weights[0]
    residual = x @ w + model.biases[0] - targets
    n, d_out = residual.shape
    grad_w = 2.0 * x.T @ residual / (n * d_out)
    _, d_weights, d_biases = model._gradients(states, actions, targets)
    assert np.allclose(d_weights[0], grad_w, atol=1e-12)
    assert np.allclose(d_biases[0], 2.0 * residual.sum(axis=0) / (n * d_out),
                       atol=1e-12)


def test_gradient_check_random_tanh_models():
    rng = np.random.default_rng(21)
    for i in range(5):
        state_dim = int(rng.integers(2, 5))
        action_dim = int(rng.integers(1, 3))
        model = MlpWorldModel(state_dim, action_dim, (6, 5), seed=100 + i)
        batch = random_batch(rng, 6, state_dim, action_dim)
        assert gradient_check(model, batch, eps=1e-5) < 1e-4


def test_zero_model_on_zero_batch_has_zero_error():
    model = MlpWorldModel(2, 1, (), seed=22)
    model.weights[0][:] = 0.0
    batch = [Transition(np.zeros(2), np.zeros(1), 0.0, np.zeros(2), False)]
    assert gradient_check(model, batch, eps=1e-5) == 0.0


def test_gradient_check_eps_must_be_small_positive():
    model = MlpWorldModel(2, 1, (), seed=0)
    batch = random_batch(np.random.default_rng(0), 2, 2, 1)
    for eps in (0.0, -1e-5, 1e-2):
        with pytest.raises(ConfigError):
            gradient_check(model, batch, eps=eps)
