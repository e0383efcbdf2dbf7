"""Adaptive update-to-data ratio control.

The controller tracks how many environment steps should pass between
gradient updates of the world model (the inverted update-to-data ratio,
``iutd_ratio``) and adjusts it online from the trend of a held-out
validation loss: a drop since the previous evaluation means the model is
still underfitting, so updates become more frequent (ratio divided by
``increment_c``); a rise or a tie means overfitting, so updates become
sparser (ratio multiplied by ``increment_c``). The ratio is kept inside
``[iutd_min, iutd_max]`` at all times.

Scheduling is event-based: :meth:`UtdController.tick` is called once per
environment step and reports how many training steps are due, whether a
fresh batch of validation data should be collected, and whether the
validation loss should be evaluated now.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError, EvaluationError

# Emission tolerance for the fractional-update accumulator. Absorbs float
# drift so an integer ratio r emits exactly one update every r steps over
# arbitrarily long horizons (naive accumulation of 1/r can lose an update,
# e.g. r=10 over 1e5 steps).
CREDIT_EPS = 1e-9


def clamp(x: float, lo: float, hi: float) -> float:
    """Clamp ``x`` into ``[lo, hi]``; raises ConfigError when lo > hi."""
    if lo > hi:
        raise ConfigError(f"clamp bounds inverted: lo={lo} > hi={hi}")
    return min(hi, max(lo, x))


@dataclass(frozen=True)
class ControllerConfig:
    """Hyperparameters of the ratio controller.

    ``initial_iutd`` is clamped into ``[iutd_min, iutd_max]`` on
    construction of the controller. ``eval_interval_k`` must be smaller
    than ``collect_interval_d`` so several evaluations happen per
    collection cycle. During the first ``early_phase_steps`` environment
    steps the collection interval is halved, refreshing the validation
    set faster while the policy still changes quickly. ``adaptive=False``
    freezes the ratio at its initial value (fixed-ratio baseline mode).
    """

    initial_iutd: float = 5.0
    iutd_min: float = 1.0
    iutd_max: float = 15.0
    increment_c: float = 1.3
    eval_interval_k: int = 500
    collect_interval_d: int = 100_000
    collect_count_s: int = 3_000
    early_phase_steps: int = 0
    adaptive: bool = True

    def validate(self) -> None:
        if not (self.initial_iutd > 0 and math.isfinite(self.initial_iutd)):
            raise ConfigError(f"initial_iutd must be a positive real, got {self.initial_iutd}")
        if not (self.iutd_min > 0 and math.isfinite(self.iutd_min)):
            raise ConfigError(f"iutd_min must be a positive real, got {self.iutd_min}")
        if not (self.iutd_max > 0 and math.isfinite(self.iutd_max)):
            raise ConfigError(f"iutd_max must be a positive real, got {self.iutd_max}")
        if self.iutd_min > self.iutd_max:
            raise ConfigError(
                f"iutd_min={self.iutd_min} exceeds iutd_max={self.iutd_max}"
            )
        if not (self.increment_c > 1 and math.isfinite(self.increment_c)):
            raise ConfigError(f"increment_c must be > 1, got {self.increment_c}")
        if self.eval_interval_k < 1:
            raise ConfigError(f"eval_interval_k must be a positive integer, got {self.eval_interval_k}")
        if self.collect_interval_d < 1:
            raise ConfigError(f"collect_interval_d must be a positive integer, got {self.collect_interval_d}")
        if self.eval_interval_k >= self.collect_interval_d:
            raise ConfigError(
                "eval_interval_k must be smaller than collect_interval_d, got "
                f"k={self.eval_interval_k} d={self.collect_interval_d}"
            )
        if self.collect_count_s < 1:
            raise ConfigError(f"collect_count_s must be a positive integer, got {self.collect_count_s}")
        if self.early_phase_steps < 0:
            raise ConfigError(f"early_phase_steps must be nonnegative, got {self.early_phase_steps}")


@dataclass
class ControllerState:
    """Mutable state: current ratio, loss baseline, accumulator, step count."""

    iutd_ratio: float
    previous_loss: Optional[float] = None
    update_credit: float = 0.0
    env_step: int = 0


@dataclass(frozen=True)
class StepEvents:
    """What a single environment step triggers."""

    train_steps_due: int
    collect_validation: bool
    evaluate: bool


@dataclass(frozen=True)
class Adjustment:
    """Outcome of one validation-loss recording.

    ``direction`` is ``"underfit"`` (ratio decreased: train more often),
    ``"overfit"`` (ratio increased: train less often) or ``"none"`` (first
    evaluation, or fixed-ratio mode).
    """

    old_iutd: float
    new_iutd: float
    direction: str


class UtdController:
    """State machine implementing the adaptive ratio schedule.

    Single-threaded and synchronous; every operation is constant time.
    """

    def __init__(self, cfg: ControllerConfig):
        cfg.validate()
        self.cfg = cfg
        self.state = ControllerState(
            iutd_ratio=clamp(cfg.initial_iutd, cfg.iutd_min, cfg.iutd_max)
        )

    def tick(self) -> StepEvents:
        """Advance by one environment step and report due events.

        Call once per step, after that step's transition has been stored.
        Training steps accrue through a fractional accumulator (one unit
        of credit per ``iutd_ratio`` steps, whole units are emitted), which
        reduces to "one training step every ``iutd_ratio`` steps" exactly
        when the ratio is an integer.
        """
        st = self.state
        cfg = self.cfg
        st.env_step += 1

        effective_d = cfg.collect_interval_d
        if st.env_step <= cfg.early_phase_steps:
            effective_d = max(1, cfg.collect_interval_d // 2)
        collect = st.env_step % effective_d == 0
        evaluate = st.env_step % cfg.eval_interval_k == 0

        st.update_credit += 1.0 / st.iutd_ratio
        due = int(math.floor(st.update_credit + CREDIT_EPS))
        st.update_credit = max(0.0, st.update_credit - due)
        return StepEvents(train_steps_due=due, collect_validation=collect, evaluate=evaluate)

    def register_validation_collection(self, s: int) -> None:
        """Account for ``s`` freshly collected validation transitions.

        Validation data costs real environment interaction, so the step
        counter jumps forward by ``s``.
        """
        if s < 0:
            raise ConfigError(f"collected transition count must be nonnegative, got {s}")
        self.state.env_step += int(s)

    def record_validation_loss(self, loss: float) -> Adjustment:
        """Compare ``loss`` against the previous evaluation and adjust.

        The first recorded loss only establishes the baseline. Afterwards
        a strictly lower loss divides the ratio by ``increment_c``
        (underfitting: update more); an equal or higher loss multiplies it
        (overfitting: update less). Ties count as overfitting. The result
        is clamped into the configured interval immediately. In
        ``adaptive=False`` mode the loss is recorded but the ratio never
        moves.
        """
        if not math.isfinite(loss):
            raise EvaluationError(f"validation loss must be finite, got {loss}")
        st = self.state
        cfg = self.cfg
        old = st.iutd_ratio
        if st.previous_loss is None:
            st.previous_loss = float(loss)
            return Adjustment(old_iutd=old, new_iutd=old, direction="none")
        if not cfg.adaptive:
            st.previous_loss = float(loss)
            return Adjustment(old_iutd=old, new_iutd=old, direction="none")
        if loss < st.previous_loss:
            new = clamp(old / cfg.increment_c, cfg.iutd_min, cfg.iutd_max)
            direction = "underfit"
        else:
            new = clamp(old * cfg.increment_c, cfg.iutd_min, cfg.iutd_max)
            direction = "overfit"
        st.iutd_ratio = new
        st.previous_loss = float(loss)
        return Adjustment(old_iutd=old, new_iutd=new, direction=direction)
