"""The main experiment loop wiring controller, buffers, learner, planner.

One run is a pure function of (config, seed). Per environment step the
loop acts, stores the transition, then asks the controller what is due:
collecting a fresh validation batch (which itself costs environment
steps), performing training steps, or evaluating the validation loss
that drives the ratio adjustment. Periodic checkpoint records capture
return, losses, the current ratio, and the training-step budget spent.

``run_experiment`` drives an environment through the planner;
``run_supervised_experiment`` runs the same event loop over a drifting
regression stream, where one environment step means one stream tick.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .buffers import ReplayBuffer, Transition, ValidationBuffer
from .config import ExperimentConfig, KIND_SUPERVISED, config_hash
from .controller import UtdController
from .envs import DriftingStream, PendulumEnv
from .errors import ConfigError, DivergenceError, EvaluationError
from .model import MlpWorldModel
from .planner import plan_action

CSV_COLUMNS = ("env_step", "return_mean", "iutd_ratio", "val_loss",
               "train_loss", "cum_train_steps")


@dataclass(frozen=True)
class CheckpointRecord:
    env_step: int
    return_mean: float
    iutd_ratio: float
    val_loss: float
    train_loss: float
    cum_train_steps: int


@dataclass
class RunLog:
    seed: int
    config_hash: str
    algorithm: str
    records: list[CheckpointRecord] = field(default_factory=list)
    diverged: bool = False

    @property
    def final_env_step(self) -> int:
        return self.records[-1].env_step if self.records else 0

    def column(self, name: str) -> np.ndarray:
        if name not in CSV_COLUMNS:
            raise ConfigError(f"unknown run-log column {name!r}")
        return np.array([getattr(r, name) for r in self.records])


def episode_return(env, policy, rng: np.random.Generator) -> float:
    """Undiscounted return of one episode, truncated at env.horizon."""
    state = env.reset(rng)
    total = 0.0
    for _ in range(env.horizon):
        action = policy(state, rng)
        state, reward, terminal = env.step(state, action, rng)
        total += reward
        if terminal:
            break
    return total


def make_env(env_cfg):
    if env_cfg.name == "pendulum":
        return PendulumEnv(noise_std=env_cfg.noise_std, horizon=env_cfg.horizon)
    raise ConfigError(f"unknown env name {env_cfg.name!r}")


def _spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _derive_int_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed).spawn(index + 1)[index].generate_state(1)[0])


class _Recorder:
    """Emits one checkpoint record per interval crossing of env_step."""

    def __init__(self, log: RunLog, interval: int):
        self.log = log
        self.interval = interval
        self.next_at = interval

    def maybe_record(self, env_step: int, make_record) -> None:
        if env_step >= self.next_at:
            self._emit(env_step, make_record)

    def record_final(self, env_step: int, make_record) -> None:
        if not self.log.records or self.log.records[-1].env_step < env_step:
            self._emit(env_step, make_record)

    def _emit(self, env_step: int, make_record) -> None:
        self.log.records.append(make_record(env_step))
        self.next_at = (env_step // self.interval + 1) * self.interval


def run_experiment(cfg: ExperimentConfig, seed: int,
                   capture: dict | None = None) -> RunLog:
    """Model-based control run; deterministic per (cfg, seed).

    ``capture``, when given, is filled with the final in-memory objects
    (model, replay, validation, controller) plus interaction and
    collection counters, for checkpointing and inspection.
    """
    cfg.validate()
    env = make_env(cfg.env)
    env_rng, plan_rng, sample_rng, collect_rng, eval_rng = _spawn_rngs(seed, 5)
    model = MlpWorldModel(env.state_dim, env.action_dim,
                          cfg.learner.hidden_sizes, _derive_int_seed(seed, 5))
    controller = UtdController(cfg.controller)
    replay = ReplayBuffer(cfg.buffers.replay_capacity)
    validation = ValidationBuffer(cfg.buffers.validation_capacity)
    log = RunLog(seed=seed, config_hash=config_hash(cfg), algorithm=cfg.cell_tag())
    recorder = _Recorder(log, cfg.checkpoint_interval)

    lo, hi = env.action_bounds
    action_range = hi - lo
    last_train_loss = math.nan
    last_val_loss = math.nan
    cum_train = 0

    def noise_std() -> float:
        frac = min(1.0, controller.state.env_step / cfg.total_steps)
        level = cfg.planner.noise_initial + frac * (
            cfg.planner.noise_final - cfg.planner.noise_initial
        )
        return level * action_range

    def noisy_policy(state, rng):
        action = plan_action(model, state, cfg.planner.horizon,
                             cfg.planner.n_candidates, rng, env.action_bounds)
        return np.clip(action + rng.normal(0.0, noise_std(), size=action.shape), lo, hi)

    def quiet_policy(state, rng):
        return plan_action(model, state, cfg.planner.horizon,
                           cfg.planner.n_candidates, rng, env.action_bounds)

    counters = {"interactions": 0, "collections": 0, "validation_collected": 0}

    def collect_validation() -> None:
        policy = noisy_policy if cfg.planner.validation_noise else quiet_policy
        gathered = 0
        target = cfg.controller.collect_count_s
        while gathered < target:
            vstate = env.reset(collect_rng)
            for _ in range(env.horizon):
                action = policy(vstate, collect_rng)
                nxt, reward, terminal = env.step(vstate, action, collect_rng)
                validation.push(Transition(vstate, action, reward, nxt, terminal))
                vstate = nxt
                gathered += 1
                if terminal or gathered >= target:
                    break
        controller.register_validation_collection(target)
        counters["collections"] += 1
        counters["validation_collected"] += target

    def make_record(env_step: int) -> CheckpointRecord:
        if cfg.eval_episodes > 0:
            returns = [episode_return(env, quiet_policy, eval_rng)
                       for _ in range(cfg.eval_episodes)]
            ret = float(np.mean(returns))
        else:
            ret = math.nan
        return CheckpointRecord(env_step, ret, controller.state.iutd_ratio,
                                last_val_loss, last_train_loss, cum_train)

    if cfg.buffers.bootstrap_validation:
        collect_validation()

    state = env.reset(env_rng)
    episode_len = 0
    while controller.state.env_step < cfg.total_steps:
        action = noisy_policy(state, plan_rng)
        nxt, reward, terminal = env.step(state, action, env_rng)
        replay.push(Transition(state, action, reward, nxt, terminal))
        events = controller.tick()
        counters["interactions"] += 1
        state = nxt
        episode_len += 1
        if terminal or episode_len >= env.horizon:
            state = env.reset(env_rng)
            episode_len = 0

        if events.collect_validation:
            collect_validation()
        try:
            for _ in range(events.train_steps_due):
                last_train_loss = model.train_step(
                    replay.sample_batch(cfg.learner.batch_size, sample_rng),
                    cfg.learner.learning_rate,
                )
                cum_train += 1
            if events.evaluate and len(validation) > 0:
                report = model.evaluate(validation.validation_pass())
                controller.record_validation_loss(report.value)
                last_val_loss = report.value
        except (DivergenceError, EvaluationError):
            log.diverged = True
            break
        recorder.maybe_record(controller.state.env_step, make_record)

    recorder.record_final(controller.state.env_step, make_record)
    if capture is not None:
        capture.update(model=model, replay=replay, validation=validation,
                       controller=controller, **counters)
    return log


def run_supervised_experiment(cfg: ExperimentConfig, seed: int,
                              capture: dict | None = None) -> RunLog:
    """Drifting-stream run: the same schedule on a regression stream."""
    cfg.validate()
    if cfg.kind != KIND_SUPERVISED:
        raise ConfigError(f"run_supervised_experiment needs kind=supervised, got {cfg.kind!r}")
    stream_rng, collect_rng, sample_rng = _spawn_rngs(seed, 3)
    stream = DriftingStream(
        cfg.stream.state_dim, cfg.stream.teacher_hidden,
        teacher_seed=_derive_int_seed(seed, 3),
        drift_per_step=cfg.stream.drift_per_step,
        noise_std=cfg.stream.noise_std,
        samples_per_step=cfg.stream.samples_per_step,
        max_train_samples=cfg.stream.max_train_samples,
        teacher_gain=cfg.stream.teacher_gain,
    )
    model = MlpWorldModel(stream.state_dim, stream.action_dim,
                          cfg.learner.hidden_sizes, _derive_int_seed(seed, 4))
    controller = UtdController(cfg.controller)
    replay = ReplayBuffer(cfg.buffers.replay_capacity)
    validation = ValidationBuffer(cfg.buffers.validation_capacity)
    log = RunLog(seed=seed, config_hash=config_hash(cfg), algorithm=cfg.cell_tag())
    recorder = _Recorder(log, cfg.checkpoint_interval)

    last_train_loss = math.nan
    last_val_loss = math.nan
    cum_train = 0

    counters = {"interactions": 0, "collections": 0, "validation_collected": 0}

    def collect_validation() -> None:
        target = cfg.controller.collect_count_s
        step = controller.state.env_step
        for t in stream.draw_validation(step, target, collect_rng):
            validation.push(t)
        controller.register_validation_collection(target)
        counters["collections"] += 1
        counters["validation_collected"] += target

    def make_record(env_step: int) -> CheckpointRecord:
        return CheckpointRecord(env_step, math.nan, controller.state.iutd_ratio,
                                last_val_loss, last_train_loss, cum_train)

    if cfg.buffers.bootstrap_validation:
        collect_validation()

    while controller.state.env_step < cfg.total_steps:
        for t in stream.emit(controller.state.env_step, stream_rng):
            replay.push(t)
        events = controller.tick()
        counters["interactions"] += 1
        if events.collect_validation:
            collect_validation()
        try:
            if len(replay) > 0:
                for _ in range(events.train_steps_due):
                    last_train_loss = model.train_step(
                        replay.sample_batch(cfg.learner.batch_size, sample_rng),
                        cfg.learner.learning_rate,
                    )
                    cum_train += 1
            if events.evaluate and len(validation) > 0:
                report = model.evaluate(validation.validation_pass())
                controller.record_validation_loss(report.value)
                last_val_loss = report.value
        except (DivergenceError, EvaluationError):
            log.diverged = True
            break
        recorder.maybe_record(controller.state.env_step, make_record)

    recorder.record_final(controller.state.env_step, make_record)
    if capture is not None:
        capture.update(model=model, replay=replay, validation=validation,
                       controller=controller, **counters)
    return log


def run_for_kind(cfg: ExperimentConfig, seed: int) -> RunLog:
    if cfg.kind == KIND_SUPERVISED:
        return run_supervised_experiment(cfg, seed)
    return run_experiment(cfg, seed)


# ----------------------------------------------------------------------
# run-log persistence
# ----------------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_run_csv(log: RunLog, path: str) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for rec in log.records:
        lines.append(",".join(_cell(getattr(rec, col)) for col in CSV_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_run_csv(path: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected columns {header}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(CSV_COLUMNS)))
    return {col: data[:, i] for i, col in enumerate(CSV_COLUMNS)}


def write_run_metadata(log: RunLog, cfg: ExperimentConfig, path: str,
                       wall_time_s: float, extra: dict | None = None) -> None:
    payload = {
        "seed": log.seed,
        "config_hash": log.config_hash,
        "algorithm": log.algorithm,
        "adaptive": cfg.controller.adaptive,
        "initial_iutd": cfg.controller.initial_iutd,
        "increment_c": cfg.controller.increment_c,
        "learning_rate": cfg.learner.learning_rate,
        "kind": cfg.kind,
        "total_steps": cfg.total_steps,
        "final_env_step": log.final_env_step,
        "diverged": log.diverged,
        "wall_time_s": wall_time_s,
    }
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_paths(out_dir: str, tag: str, seed: int) -> tuple[str, str]:
    cell_dir = os.path.join(out_dir, tag)
    return (os.path.join(cell_dir, f"seed_{seed}.csv"),
            os.path.join(cell_dir, f"seed_{seed}.json"))
