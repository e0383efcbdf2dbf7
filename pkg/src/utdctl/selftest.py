"""Built-in sanity checks runnable from the command line.

Each check recomputes an expected result through an independent route
(a closed-form fold, a brute-force count, finite differences, or a
hand-computed constant) and compares the live implementation against
it. Useful as a quick install smoke test; the full test suite covers
the same ground more thoroughly.
"""

from __future__ import annotations

import numpy as np

from .buffers import Transition
from .controller import ControllerConfig, UtdController, clamp
from .metrics import iqm, normalized_score, optimality_gap
from .model import MlpWorldModel, gradient_check


def check_controller_trajectory(n_sequences: int = 200, n_losses: int = 50,
                                seed: int = 0) -> tuple[bool, str]:
    """Controller ratio must match an independent clamp-fold oracle."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_sequences):
        c = float(rng.uniform(1.05, 2.0))
        cfg = ControllerConfig(initial_iutd=5.0, iutd_min=1.0, iutd_max=15.0,
                               increment_c=c)
        controller = UtdController(cfg)
        losses = rng.uniform(0.0, 1.0, size=n_losses)
        expected = cfg.initial_iutd
        previous = None
        for loss in losses:
            controller.record_validation_loss(float(loss))
            if previous is not None:
                factor = (1.0 / c) if loss < previous else c
                expected = clamp(expected * factor, cfg.iutd_min, cfg.iutd_max)
            previous = loss
            err = abs(controller.state.iutd_ratio - expected) / max(expected, 1e-12)
            worst = max(worst, err)
    ok = worst <= 1e-9
    return ok, f"max relative error {worst:.3e} over {n_sequences} sequences"


def check_scheduling(total_steps: int = 10_000) -> tuple[bool, str]:
    """Integer ratios must emit exactly floor(T / ratio) training steps."""
    for ratio in (1, 2, 4, 5, 7, 10, 16):
        cfg = ControllerConfig(initial_iutd=float(ratio), iutd_max=32.0,
                               adaptive=False)
        controller = UtdController(cfg)
        count = sum(controller.tick().train_steps_due for _ in range(total_steps))
        if count != total_steps // ratio:
            return False, f"ratio {ratio}: {count} != {total_steps // ratio}"
    return True, f"exact for ratios 1..16 over {total_steps} steps"


def check_gradients(n_models: int = 3, seed: int = 0) -> tuple[bool, str]:
    """Backprop must agree with central finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_models):
        state_dim = int(rng.integers(2, 4))
        action_dim = int(rng.integers(1, 3))
        model = MlpWorldModel(state_dim, action_dim, (5, 4), seed=seed + i)
        batch = [
            Transition(rng.normal(size=state_dim), rng.normal(size=action_dim),
                       float(rng.normal()), rng.normal(size=state_dim), False)
            for _ in range(5)
        ]
        worst = max(worst, gradient_check(model, batch, eps=1e-5))
    ok = worst < 1e-4
    return ok, f"max relative error {worst:.3e} over {n_models} models"


def check_metric_oracles() -> tuple[bool, str]:
    checks = [
        (iqm([1, 2, 3, 4, 5, 6, 7, 8]), 4.5),
        (optimality_gap([0.5, 1.5]), 0.25),
        (normalized_score(100.0, 100.0, 1100.0), 0.0),
        (normalized_score(1100.0, 100.0, 1100.0), 1.0),
    ]
    for got, want in checks:
        if got != want:
            return False, f"expected {want}, got {got}"
    return True, "iqm / optimality gap / normalized score constants exact"


CHECKS = (
    ("controller-trajectory", check_controller_trajectory),
    ("scheduling", check_scheduling),
    ("gradients", check_gradients),
    ("metric-oracles", check_metric_oracles),
)


def run_selftest(printer=print) -> int:
    failures = 0
    for name, check in CHECKS:
        ok, detail = check()
        printer(f"selftest {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1
