"""Experiment configuration: typed dataclasses plus an INI file format.

A config file has sections mirroring the module configs::

    [experiment]   kind, total_steps, checkpoint_interval, eval_episodes,
                   seeds, tag, output_dir
    [controller]   initial_iutd, iutd_min, iutd_max, increment_c,
                   eval_interval_k, collect_interval_d, collect_count_s,
                   early_phase_steps, adaptive
    [learner]      hidden_sizes, learning_rate, batch_size
    [planner]      horizon, n_candidates, noise_initial, noise_final,
                   validation_noise            (mbrl runs only)
    [env]          name, noise_std, horizon    (mbrl runs only)
    [stream]       state_dim, teacher_hidden, teacher_gain, drift_per_step,
                   noise_std, samples_per_step, max_train_samples
                                               (supervised runs only)
    [buffers]      replay_capacity, validation_capacity,
                   bootstrap_validation
    [sweep]        axis, values, include_adaptive, budget   (cmd_sweep only)

Every key has a default; unknown sections or keys are errors so a typoed
hyperparameter name cannot silently fall back to its default.
``serialize_config`` emits a canonical rendering (all keys explicit,
fixed order) whose parse-serialize round trip is idempotent, and
``config_hash`` fingerprints that rendering with the output directory
blanked, so where results land does not change the experiment identity.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import math
import os
from dataclasses import dataclass, field

from .controller import ControllerConfig
from .errors import ConfigError

KIND_MBRL = "mbrl"
KIND_SUPERVISED = "supervised"
ENV_NAMES = ("pendulum",)


@dataclass(frozen=True)
class LearnerConfig:
    hidden_sizes: tuple[int, ...] = (32, 32)
    learning_rate: float = 9e-3
    batch_size: int = 64

    def validate(self) -> None:
        if any(h < 1 for h in self.hidden_sizes):
            raise ConfigError(f"hidden_sizes must be positive, got {self.hidden_sizes}")
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ConfigError(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 16
    n_candidates: int = 40
    noise_initial: float = 0.1
    noise_final: float = 0.01
    validation_noise: bool = True

    def validate(self) -> None:
        if self.horizon < 1:
            raise ConfigError(f"planner horizon must be positive, got {self.horizon}")
        if self.n_candidates < 1:
            raise ConfigError(f"n_candidates must be positive, got {self.n_candidates}")
        for name in ("noise_initial", "noise_final"):
            v = getattr(self, name)
            if not (0 <= v and math.isfinite(v)):
                raise ConfigError(f"{name} must be nonnegative, got {v}")


@dataclass(frozen=True)
class EnvConfig:
    name: str = "pendulum"
    noise_std: float = 0.05
    horizon: int = 200

    def validate(self) -> None:
        if self.name not in ENV_NAMES:
            raise ConfigError(f"unknown env name {self.name!r}; known: {ENV_NAMES}")
        if self.noise_std < 0:
            raise ConfigError(f"env noise_std must be nonnegative, got {self.noise_std}")
        if self.horizon < 1:
            raise ConfigError(f"env horizon must be positive, got {self.horizon}")


@dataclass(frozen=True)
class StreamConfig:
    state_dim: int = 4
    teacher_hidden: tuple[int, ...] = (32, 32)
    teacher_gain: float = 2.0
    drift_per_step: float = 0.0
    noise_std: float = 0.0
    samples_per_step: int = 1
    max_train_samples: int = 0

    def validate(self) -> None:
        if self.state_dim < 1:
            raise ConfigError(f"stream state_dim must be positive, got {self.state_dim}")
        if any(h < 1 for h in self.teacher_hidden):
            raise ConfigError(f"teacher_hidden must be positive, got {self.teacher_hidden}")
        if not math.isfinite(self.teacher_gain):
            raise ConfigError(f"teacher_gain must be finite, got {self.teacher_gain}")
        if not math.isfinite(self.drift_per_step):
            raise ConfigError(f"drift_per_step must be finite, got {self.drift_per_step}")
        if self.noise_std < 0:
            raise ConfigError(f"stream noise_std must be nonnegative, got {self.noise_std}")
        if self.samples_per_step < 1:
            raise ConfigError(f"samples_per_step must be positive, got {self.samples_per_step}")
        if self.max_train_samples < 0:
            raise ConfigError(f"max_train_samples must be nonnegative, got {self.max_train_samples}")


@dataclass(frozen=True)
class BuffersConfig:
    replay_capacity: int = 1_000_000
    validation_capacity: int = 1_000
    bootstrap_validation: bool = True

    def validate(self) -> None:
        if self.replay_capacity < 1:
            raise ConfigError(f"replay_capacity must be positive, got {self.replay_capacity}")
        if self.validation_capacity < 1:
            raise ConfigError(f"validation_capacity must be positive, got {self.validation_capacity}")


@dataclass(frozen=True)
class SweepSpec:
    axis: str = "fixed_iutd"
    values: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 15.0)
    include_adaptive: bool = True
    budget: int = 64

    AXES = ("fixed_iutd", "learning_rate", "increment_c")

    def validate(self) -> None:
        if self.axis not in self.AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; known: {self.AXES}")
        if not self.values:
            raise ConfigError("sweep values must be non-empty")
        if any(not (v > 0 and math.isfinite(v)) for v in self.values):
            raise ConfigError(f"sweep values must be positive, got {self.values}")
        if self.budget < 1:
            raise ConfigError(f"sweep budget must be positive, got {self.budget}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = KIND_MBRL
    total_steps: int = 50_000
    checkpoint_interval: int = 1_000
    eval_episodes: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    tag: str = ""
    output_dir: str = ""
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    buffers: BuffersConfig = field(default_factory=BuffersConfig)
    sweep: SweepSpec | None = None

    def validate(self) -> None:
        if self.kind not in (KIND_MBRL, KIND_SUPERVISED):
            raise ConfigError(f"kind must be mbrl or supervised, got {self.kind!r}")
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be positive, got {self.total_steps}")
        if self.checkpoint_interval < 1:
            raise ConfigError(f"checkpoint_interval must be positive, got {self.checkpoint_interval}")
        if self.eval_episodes < 0:
            raise ConfigError(f"eval_episodes must be nonnegative, got {self.eval_episodes}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {self.seeds}")
        self.controller.validate()
        self.learner.validate()
        self.planner.validate()
        if self.kind == KIND_MBRL:
            self.env.validate()
        else:
            self.stream.validate()
        self.buffers.validate()
        if self.sweep is not None:
            self.sweep.validate()

    def cell_tag(self) -> str:
        if self.tag:
            return self.tag
        if self.controller.adaptive:
            return "adaptive"
        return f"fixed_{self.controller.initial_iutd:g}"


# ----------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------

def _parse_int_list(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(part.strip()) for part in raw.split(","))


def _parse_float_list(raw: str) -> tuple[float, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(float(part.strip()) for part in raw.split(","))


_BOOLS = {"true": True, "yes": True, "1": True, "on": True,
          "false": False, "no": False, "0": False, "off": False}


def _convert(section: str, key: str, raw: str, kind: type):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered not in _BOOLS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOLS[lowered]
        if kind is int:
            return int(raw.strip())
        if kind is float:
            return float(raw.strip())
        if kind is str:
            return raw.strip()
        if kind is tuple:
            return _parse_int_list(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None
    raise AssertionError(f"unhandled config type {kind}")


# (section, key) -> value type; tuple means comma-separated ints
_SCHEMA: dict[str, dict[str, type]] = {
    "experiment": {
        "kind": str, "total_steps": int, "checkpoint_interval": int,
        "eval_episodes": int, "seeds": tuple, "tag": str, "output_dir": str,
    },
    "controller": {
        "initial_iutd": float, "iutd_min": float, "iutd_max": float,
        "increment_c": float, "eval_interval_k": int, "collect_interval_d": int,
        "collect_count_s": int, "early_phase_steps": int, "adaptive": bool,
    },
    "learner": {"hidden_sizes": tuple, "learning_rate": float, "batch_size": int},
    "planner": {
        "horizon": int, "n_candidates": int, "noise_initial": float,
        "noise_final": float, "validation_noise": bool,
    },
    "env": {"name": str, "noise_std": float, "horizon": int},
    "stream": {
        "state_dim": int, "teacher_hidden": tuple, "teacher_gain": float,
        "drift_per_step": float, "noise_std": float, "samples_per_step": int,
        "max_train_samples": int,
    },
    "buffers": {
        "replay_capacity": int, "validation_capacity": int,
        "bootstrap_validation": bool,
    },
    "sweep": {"axis": str, "values": str, "include_adaptive": bool, "budget": int},
}

_SECTION_TYPES = {
    "controller": ControllerConfig,
    "learner": LearnerConfig,
    "planner": PlannerConfig,
    "env": EnvConfig,
    "stream": StreamConfig,
    "buffers": BuffersConfig,
}


def _read_section(parser: configparser.ConfigParser, section: str) -> dict:
    if not parser.has_section(section):
        return {}
    schema = _SCHEMA[section]
    values: dict = {}
    for key, raw in parser.items(section):
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        values[key] = _convert(section, key, raw, schema[key])
    return values


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = set(_SCHEMA)
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{source}: unknown section [{section}]")

    kwargs: dict = dict(_read_section(parser, "experiment"))
    for section, cls in _SECTION_TYPES.items():
        kwargs[section] = cls(**_read_section(parser, section))
    if parser.has_section("sweep"):
        raw = _read_section(parser, "sweep")
        if "values" in raw:
            try:
                raw["values"] = _parse_float_list(raw["values"])
            except ValueError as exc:
                raise ConfigError(f"[sweep] values: {exc}") from None
        kwargs["sweep"] = SweepSpec(**raw)
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def parse_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


# ----------------------------------------------------------------------
# serialization / identity
# ----------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical INI rendering: every key explicit, fixed order."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["experiment"] = {
        key: _fmt(getattr(cfg, key)) for key in _SCHEMA["experiment"]
    }
    for section, _ in _SECTION_TYPES.items():
        sub = getattr(cfg, section)
        parser[section] = {key: _fmt(getattr(sub, key)) for key in _SCHEMA[section]}
    if cfg.sweep is not None:
        sweep = cfg.sweep
        parser["sweep"] = {
            "axis": sweep.axis,
            "values": ", ".join(_fmt(v) for v in sweep.values),
            "include_adaptive": _fmt(sweep.include_adaptive),
            "budget": _fmt(sweep.budget),
        }
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical form, independent of output location."""
    neutral = dataclasses.replace(cfg, output_dir="")
    return hashlib.sha256(serialize_config(neutral).encode("utf-8")).hexdigest()


# ----------------------------------------------------------------------
# sweep expansion
# ----------------------------------------------------------------------

def expand_sweep(cfg: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """All (cell_tag, per-cell config) pairs of the sweep grid.

    fixed_iutd sweeps fix the controller at each grid value and add one
    adaptive cell; learning_rate sweeps pair an adaptive and a fixed cell
    at every rate; increment_c sweeps are adaptive-only.
    """
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] section")
    sweep = cfg.sweep
    base = dataclasses.replace(cfg, sweep=None)
    cells: list[tuple[str, ExperimentConfig]] = []

    def cell(tag: str, **changes) -> None:
        ctrl = dataclasses.replace(base.controller, **changes)
        cells.append((tag, dataclasses.replace(base, controller=ctrl, tag=tag)))

    if sweep.axis == "fixed_iutd":
        for v in sweep.values:
            cell(f"fixed_{v:g}", adaptive=False, initial_iutd=v)
        if sweep.include_adaptive:
            cell("adaptive", adaptive=True)
    elif sweep.axis == "learning_rate":
        for v in sweep.values:
            learner = dataclasses.replace(base.learner, learning_rate=v)
            for adaptive in (True, False) if sweep.include_adaptive else (False,):
                mode = "adaptive" if adaptive else f"fixed_{base.controller.initial_iutd:g}"
                tag = f"{mode}_lr{v:g}"
                ctrl = dataclasses.replace(base.controller, adaptive=adaptive)
                cells.append((tag, dataclasses.replace(
                    base, controller=ctrl, learner=learner, tag=tag)))
    else:  # increment_c
        for v in sweep.values:
            if v <= 1:
                raise ConfigError(f"increment_c sweep values must be > 1, got {v}")
            cell(f"c_{v:g}", adaptive=True, increment_c=v)

    total = len(cells) * len(cfg.seeds)
    if total > sweep.budget:
        raise ConfigError(
            f"sweep needs {total} runs ({len(cells)} cells x {len(cfg.seeds)} seeds), "
            f"over budget {sweep.budget}"
        )
    return cells
