"""Adaptive update-to-data ratio control with a desk-scale testbed.

The controller watches a held-out validation loss and adjusts how many
environment steps pass between world-model updates, balancing under-
and overfitting online. The package bundles the controller, replay and
validation buffers, a small MLP world model, toy environments, a
random-shooting planner, robust evaluation metrics, and a CLI that runs
seeded experiments and aggregates their results.
"""

from .buffers import ReplayBuffer, Transition, ValidationBuffer
from .config import (BuffersConfig, EnvConfig, ExperimentConfig, LearnerConfig,
                     PlannerConfig, StreamConfig, SweepSpec, config_hash,
                     expand_sweep, parse_config, parse_config_text,
                     serialize_config)
from .controller import (Adjustment, ControllerConfig, ControllerState,
                         StepEvents, UtdController, clamp)
from .envs import DriftingStream, PendulumEnv, TrueDynamicsModel
from .errors import (ConfigError, DegenerateReferenceError, DimensionError,
                     DivergenceError, EmptyBufferError, EvaluationError,
                     ReportError)
from .experiment import (CheckpointRecord, RunLog, episode_return, make_env,
                         read_run_csv, run_experiment,
                         run_supervised_experiment, write_run_csv)
from .metrics import (AggregateReport, CurvePoint, ScoreMatrix, aggregate,
                      aggregate_report, iqm, normalized_score, optimality_gap,
                      sample_efficiency_curve, stratified_bootstrap_ci)
from .model import LossReport, MlpWorldModel, gradient_check
from .planner import plan_action
from .report import calibrate_references, report_results
from .runner import derive_run_seed, run_config, run_one, run_sweep

__version__ = "0.1.0"

__all__ = [
    "Adjustment", "AggregateReport", "BuffersConfig", "CheckpointRecord",
    "ConfigError", "ControllerConfig", "ControllerState", "CurvePoint",
    "DegenerateReferenceError", "DimensionError", "DivergenceError",
    "DriftingStream", "EmptyBufferError", "EnvConfig", "EvaluationError",
    "ExperimentConfig", "LearnerConfig", "LossReport", "MlpWorldModel",
    "PendulumEnv", "PlannerConfig", "ReplayBuffer", "ReportError", "RunLog",
    "ScoreMatrix", "StepEvents", "StreamConfig", "SweepSpec", "Transition",
    "TrueDynamicsModel", "UtdController", "ValidationBuffer", "aggregate",
    "aggregate_report", "calibrate_references", "clamp", "config_hash",
    "derive_run_seed", "episode_return", "expand_sweep", "gradient_check",
    "iqm", "make_env", "normalized_score", "optimality_gap", "parse_config",
    "parse_config_text", "plan_action", "read_run_csv", "report_results",
    "run_config", "run_experiment", "run_one", "run_supervised_experiment",
    "run_sweep", "sample_efficiency_curve", "serialize_config",
    "stratified_bootstrap_ci", "write_run_csv",
]
