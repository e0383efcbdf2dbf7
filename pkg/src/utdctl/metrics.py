"""Evaluation metrics: normalized scores, robust aggregates, bootstrap CIs.

Scores from many runs and tasks are pooled into a runs-by-tasks matrix
and summarized four ways: mean, median, interquartile mean (drop the
bottom and top quarter of the pooled scores, average the rest), and the
optimality gap (mean shortfall below a score of 1). Confidence intervals
come from a stratified percentile bootstrap: each resample redraws run
indices with replacement independently per task, so per-task run counts
are preserved, and the interval is read off the empirical percentiles
with linear interpolation.

Everything here is a pure function of its inputs; passing the same rng
state reproduces the same intervals bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DegenerateReferenceError


@dataclass(frozen=True)
class ScoreMatrix:
    """Normalized scores, one row per run, one column per task."""

    values: np.ndarray
    task_names: tuple[str, ...]
    run_seeds: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 2:
            raise ConfigError(f"score matrix must be 2-D, got shape {self.values.shape}")
        n_runs, n_tasks = self.values.shape
        if n_runs == 0 or n_tasks == 0:
            raise ConfigError(f"score matrix must be non-empty, got shape {self.values.shape}")
        if len(self.task_names) != n_tasks:
            raise ConfigError(
                f"{len(self.task_names)} task names for {n_tasks} columns"
            )
        if len(self.run_seeds) != n_runs:
            raise ConfigError(f"{len(self.run_seeds)} run seeds for {n_runs} rows")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("score matrix contains non-finite entries")


def normalized_score(agent: float, random_ref: float, human_ref: float) -> float:
    """Linear rescaling: 0 at the random reference, 1 at the human one."""
    if human_ref == random_ref:
        raise DegenerateReferenceError(
            f"reference scores coincide at {human_ref}; normalization undefined"
        )
    return (agent - random_ref) / (human_ref - random_ref)


def _require_scores(scores) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ConfigError("scores must be non-empty")
    return arr


def iqm(scores) -> float:
    """Mean of the scores left after trimming floor(n/4) from each end."""
    arr = np.sort(_require_scores(scores))
    trim = arr.size // 4
    return float(np.mean(arr[trim : arr.size - trim]))


def optimality_gap(scores, threshold: float = 1.0) -> float:
    """Mean shortfall below ``threshold``; scores above it count as 0."""
    arr = _require_scores(scores)
    return float(np.mean(np.maximum(0.0, threshold - np.minimum(arr, threshold))))


METRICS: dict[str, Callable[[np.ndarray], float]] = {
    "mean": lambda a: float(np.mean(_require_scores(a))),
    "median": lambda a: float(np.median(_require_scores(a))),
    "iqm": iqm,
    "optimality_gap": optimality_gap,
}


def aggregate(matrix: ScoreMatrix, metric: str) -> float:
    """Metric over all runs-times-tasks entries pooled."""
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; known: {sorted(METRICS)}")
    return METRICS[metric](matrix.values.reshape(-1))


def stratified_bootstrap_ci(matrix: ScoreMatrix, metric: str, num_bootstrap: int,
                            alpha: float, rng: np.random.Generator) -> tuple[float, float]:
    """Percentile bootstrap interval with per-task stratified resampling.

    Per resample, one rng.integers draw of run indices per task, in
    column order; this call sequence is part of the contract so an
    independent reimplementation sharing the rng stream matches exactly.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; known: {sorted(METRICS)}")
    if num_bootstrap < 1:
        raise ConfigError(f"num_bootstrap must be positive, got {num_bootstrap}")
    if not (0 < alpha < 1):
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    values = matrix.values
    n_runs, n_tasks = values.shape
    fn = METRICS[metric]
    stats = np.empty(num_bootstrap)
    for b in range(num_bootstrap):
        columns = [
            values[rng.integers(0, n_runs, size=n_runs), j] for j in range(n_tasks)
        ]
        stats[b] = fn(np.concatenate(columns))
    lo, hi = np.percentile(stats, [100.0 * alpha / 2.0, 100.0 * (1.0 - alpha / 2.0)])
    return float(lo), float(hi)


@dataclass(frozen=True)
class AggregateReport:
    """Point estimates with bootstrap intervals for all four metrics."""

    mean: float
    median: float
    iqm: float
    optimality_gap: float
    ci_low: dict[str, float]
    ci_high: dict[str, float]
    num_bootstrap: int
    alpha: float


def aggregate_report(matrix: ScoreMatrix, num_bootstrap: int, alpha: float,
                     rng: np.random.Generator) -> AggregateReport:
    points = {name: aggregate(matrix, name) for name in METRICS}
    ci_low: dict[str, float] = {}
    ci_high: dict[str, float] = {}
    for name in METRICS:
        lo, hi = stratified_bootstrap_ci(matrix, name, num_bootstrap, alpha, rng)
        ci_low[name], ci_high[name] = lo, hi
    return AggregateReport(
        mean=points["mean"], median=points["median"], iqm=points["iqm"],
        optimality_gap=points["optimality_gap"], ci_low=ci_low, ci_high=ci_high,
        num_bootstrap=num_bootstrap, alpha=alpha,
    )


# ----------------------------------------------------------------------
# sample-efficiency curves
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    env_step: int
    point: float
    ci_low: float
    ci_high: float


def locf_value(steps: np.ndarray, values: np.ndarray, at: float) -> float:
    """Value at ``at`` by last observation carried forward.

    Queries before the first observation return the first value, so
    every grid point is defined.
    """
    steps = np.asarray(steps, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if steps.size == 0:
        raise ConfigError("cannot align an empty series")
    idx = int(np.searchsorted(steps, at, side="right")) - 1
    return float(values[max(idx, 0)])


def sample_efficiency_curve(
    task_series: Mapping[str, Sequence[tuple[np.ndarray, np.ndarray]]],
    metric: str,
    checkpoints: Sequence[int],
    num_bootstrap: int,
    alpha: float,
    rng: np.random.Generator,
) -> list[CurvePoint]:
    """Aggregate-plus-CI series over a shared checkpoint grid.

    ``task_series`` maps a task name to its runs, each a (steps, values)
    pair; runs are aligned to ``checkpoints`` by last observation carried
    forward. Every task must contribute the same number of runs so the
    stratified resampling stays rectangular.
    """
    if not task_series:
        raise ConfigError("task_series must be non-empty")
    if len(checkpoints) == 0:
        raise ConfigError("checkpoints must be non-empty")
    names = tuple(task_series.keys())
    run_counts = {len(task_series[name]) for name in names}
    if len(run_counts) != 1 or 0 in run_counts:
        raise ConfigError(f"tasks must have equal, positive run counts, got {run_counts}")
    n_runs = run_counts.pop()

    curve: list[CurvePoint] = []
    for step in checkpoints:
        cols = []
        for name in names:
            cols.append([locf_value(s, v, step) for (s, v) in task_series[name]])
        matrix = ScoreMatrix(
            values=np.array(cols, dtype=np.float64).T,
            task_names=names,
            run_seeds=tuple(range(n_runs)),
        )
        point = aggregate(matrix, metric)
        lo, hi = stratified_bootstrap_ci(matrix, metric, num_bootstrap, alpha, rng)
        curve.append(CurvePoint(env_step=int(step), point=point, ci_low=lo, ci_high=hi))
    return curve
