"""Result aggregation: turn a directory of run CSVs into report files.

A results directory holds one subdirectory per cell (an algorithm
variant), each with ``seed_<n>.csv`` run logs and ``seed_<n>.json``
sidecars. The report pipeline reads every cell and writes:

``aggregate.json``
    per cell: final scores, the four aggregate metrics with bootstrap
    confidence intervals, run metadata; plus the report parameters.
``efficiency__<cell>.csv``
    columns ``env_step, <metric>, ci_low, ci_high`` over the union
    checkpoint grid of the cell's runs.
``curves__<cell>.csv``
    columns ``env_step, mean, std`` of the raw score column across runs
    (learning-curve data, one pointwise standard deviation).
``iutd__<cell>.csv``
    columns ``env_step, iutd_mean, iutd_std``, the ratio trajectory.

Scores default to the final ``return_mean``; ``val_loss`` is negated so
that higher is always better. When a references file (from the
calibrate command) is supplied, scores are normalized so the random
policy maps to 0 and the planner-on-true-dynamics oracle to 1. Given
the same inputs and bootstrap seed the outputs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import re

import numpy as np

from .config import EnvConfig
from .errors import ConfigError, ReportError
from .experiment import episode_return, make_env, read_run_csv
from .envs import TrueDynamicsModel
from .metrics import (ScoreMatrix, aggregate_report, locf_value, METRICS,
                      normalized_score, sample_efficiency_curve)
from .planner import plan_action

SCORE_COLUMNS = ("return_mean", "val_loss")
_SEED_CSV = re.compile(r"^seed_(\d+)\.csv$")


def _cell_rng(bootstrap_seed: int, tag: str) -> np.random.Generator:
    tag_int = int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([bootstrap_seed, tag_int]))


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: str, header: tuple[str, ...], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            str(v) if isinstance(v, int) else _fmt(v) for v in row
        ))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def discover_cells(results_dir: str) -> dict[str, list[tuple[int, str]]]:
    """Map cell tag -> [(seed, csv path)] sorted by seed."""
    if not os.path.isdir(results_dir):
        raise ReportError(f"results directory not found: {results_dir}")
    cells: dict[str, list[tuple[int, str]]] = {}
    for entry in sorted(os.listdir(results_dir)):
        cell_dir = os.path.join(results_dir, entry)
        if not os.path.isdir(cell_dir):
            continue
        runs = []
        for name in os.listdir(cell_dir):
            match = _SEED_CSV.match(name)
            if match:
                runs.append((int(match.group(1)), os.path.join(cell_dir, name)))
        if runs:
            cells[entry] = sorted(runs)
    if not cells:
        raise ReportError(f"no run CSVs found under {results_dir}")
    return cells


def _load_references(path: str | None):
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as fh:
        refs = json.load(fh)
    for key in ("random_ref", "oracle_ref"):
        if key not in refs:
            raise ReportError(f"references file {path} lacks {key!r}")
    return refs


def report_results(results_dir: str, out_dir: str, *, metric: str = "iqm",
                   score_column: str = "return_mean", num_bootstrap: int = 2000,
                   alpha: float = 0.05, bootstrap_seed: int = 0,
                   references_path: str | None = None) -> dict:
    """Build every report artifact; returns the aggregate payload."""
    if metric not in METRICS:
        raise ReportError(f"unknown metric {metric!r}; known: {sorted(METRICS)}")
    if score_column not in SCORE_COLUMNS:
        raise ReportError(
            f"unknown score column {score_column!r}; known: {SCORE_COLUMNS}"
        )
    cells = discover_cells(results_dir)
    refs = _load_references(references_path)
    os.makedirs(out_dir, exist_ok=True)

    def to_score(raw: np.ndarray) -> np.ndarray:
        score = -raw if score_column == "val_loss" else raw
        if refs is not None:
            score = np.array([
                normalized_score(v, refs["random_ref"], refs["oracle_ref"])
                for v in np.atleast_1d(score)
            ])
        return score

    payload: dict = {
        "metadata": {
            "metric": metric,
            "score_column": score_column,
            "num_bootstrap": num_bootstrap,
            "alpha": alpha,
            "bootstrap_seed": bootstrap_seed,
            "normalized": refs is not None,
            "references": refs,
        },
        "cells": {},
        "errors": {},
    }

    for tag, runs in cells.items():
        try:
            payload["cells"][tag] = _report_cell(
                tag, runs, out_dir, metric=metric, score_column=score_column,
                to_score=to_score, num_bootstrap=num_bootstrap, alpha=alpha,
                rng=_cell_rng(bootstrap_seed, tag),
            )
        except (ConfigError, ReportError, OSError, ValueError) as exc:
            payload["errors"][tag] = f"{type(exc).__name__}: {exc}"

    if not payload["cells"]:
        raise ReportError(f"every cell failed: {payload['errors']}")

    with open(os.path.join(out_dir, "aggregate.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return payload


def _report_cell(tag: str, runs: list[tuple[int, str]], out_dir: str, *,
                 metric: str, score_column: str, to_score, num_bootstrap: int,
                 alpha: float, rng: np.random.Generator) -> dict:
    seeds: list[int] = []
    series: list[dict[str, np.ndarray]] = []
    for seed, path in runs:
        data = read_run_csv(path)
        if data["env_step"].size == 0:
            raise ReportError(f"{path}: empty run log")
        seeds.append(seed)
        series.append(data)

    finals = np.array([data[score_column][-1] for data in series])
    if not np.all(np.isfinite(finals)):
        bad = [seeds[i] for i in np.flatnonzero(~np.isfinite(finals))]
        raise ReportError(
            f"non-finite final {score_column} for seeds {bad} "
            f"(diverged run, or wrong score column for this run kind)"
        )
    scores = to_score(finals)

    matrix = ScoreMatrix(values=scores.reshape(-1, 1), task_names=(tag,),
                         run_seeds=tuple(seeds))
    summary = aggregate_report(matrix, num_bootstrap, alpha, rng)

    grid = np.unique(np.concatenate([data["env_step"] for data in series]))
    grid = grid.astype(np.int64)

    score_series = [
        (data["env_step"], np.asarray(to_score(data[score_column])))
        for data in series
    ]
    curve = sample_efficiency_curve(
        {tag: score_series}, metric, list(grid), num_bootstrap, alpha, rng
    )
    _write_csv(
        os.path.join(out_dir, f"efficiency__{tag}.csv"),
        ("env_step", metric, "ci_low", "ci_high"),
        [(p.env_step, p.point, p.ci_low, p.ci_high) for p in curve],
    )

    def aligned(column: str) -> np.ndarray:
        return np.array([
            [locf_value(data["env_step"], data[column], g) for g in grid]
            for data in series
        ])

    raw = aligned(score_column)
    _write_csv(
        os.path.join(out_dir, f"curves__{tag}.csv"),
        ("env_step", "mean", "std"),
        [(int(g), float(np.mean(raw[:, i])), float(np.std(raw[:, i])))
         for i, g in enumerate(grid)],
    )
    iutd = aligned("iutd_ratio")
    _write_csv(
        os.path.join(out_dir, f"iutd__{tag}.csv"),
        ("env_step", "iutd_mean", "iutd_std"),
        [(int(g), float(np.mean(iutd[:, i])), float(np.std(iutd[:, i])))
         for i, g in enumerate(grid)],
    )

    return {
        "num_runs": len(seeds),
        "seeds": seeds,
        "scores": [float(s) for s in scores],
        "final_env_steps": [int(data["env_step"][-1]) for data in series],
        "metrics": {
            name: {
                "point": getattr(summary, name),
                "ci_low": summary.ci_low[name],
                "ci_high": summary.ci_high[name],
            }
            for name in METRICS
        },
    }


# ----------------------------------------------------------------------
# reference calibration
# ----------------------------------------------------------------------

def calibrate_references(env, episodes: int, seed: int, *, horizon: int = 16,
                         n_candidates: int = 40) -> dict:
    """Monte-Carlo reference returns: random policy vs true-dynamics planner."""
    if episodes < 1:
        raise ConfigError(f"episodes must be positive, got {episodes}")
    random_rng, oracle_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)
    ]
    lo, hi = env.action_bounds

    def random_policy(state, rng):
        return rng.uniform(lo, hi, size=env.action_dim)

    oracle_model = TrueDynamicsModel(env)

    def oracle_policy(state, rng):
        return plan_action(oracle_model, state, horizon, n_candidates, rng,
                           env.action_bounds)

    random_ref = float(np.mean(
        [episode_return(env, random_policy, random_rng) for _ in range(episodes)]
    ))
    oracle_ref = float(np.mean(
        [episode_return(env, oracle_policy, oracle_rng) for _ in range(episodes)]
    ))
    return {
        "random_ref": random_ref,
        "oracle_ref": oracle_ref,
        "episodes": episodes,
        "seed": seed,
        "degenerate": random_ref == oracle_ref,
    }


def calibrate_env(env_name: str, episodes: int, seed: int, out_path: str, *,
                  horizon: int = 16, n_candidates: int = 40) -> dict:
    env = make_env(EnvConfig(name=env_name))
    refs = {"env": env_name, "horizon": horizon, "n_candidates": n_candidates}
    refs.update(calibrate_references(env, episodes, seed, horizon=horizon,
                                     n_candidates=n_candidates))
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(refs, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return refs
