"""Run orchestration: single configs, sweeps, and worker scheduling.

Each run's rng seed is derived by hashing (cell tag, seed label), so a
run's results depend only on its own identity, never on scheduling order
or worker count. Sweeps fan out over a process pool; every worker task
writes its own CSV and metadata sidecar, and failures in one cell leave
the others untouched.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ExperimentConfig, expand_sweep
from .experiment import (run_for_kind, run_paths, write_run_csv,
                         write_run_metadata)


def derive_run_seed(cell_tag: str, seed: int) -> int:
    """Stable 64-bit rng seed for one (cell, seed-label) pair."""
    digest = hashlib.sha256(f"{cell_tag}|{seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class RunResult:
    tag: str
    seed: int
    csv_path: str
    diverged: bool
    failed: bool
    message: str = ""


def run_one(cfg: ExperimentConfig, seed: int, out_dir: str) -> RunResult:
    """Execute one run and persist its CSV plus JSON sidecar."""
    tag = cfg.cell_tag()
    csv_path, meta_path = run_paths(out_dir, tag, seed)
    os.makedirs(os.path.dirname(csv_path), exist_ok=True)
    run_seed = derive_run_seed(tag, seed)
    start = time.perf_counter()
    log = run_for_kind(cfg, run_seed)
    wall = time.perf_counter() - start
    log.seed = seed
    write_run_csv(log, csv_path)
    write_run_metadata(log, cfg, meta_path, wall, extra={"run_seed": run_seed})
    return RunResult(tag=tag, seed=seed, csv_path=csv_path, diverged=log.diverged,
                     failed=False)


def _run_job(payload: tuple[ExperimentConfig, int, str]) -> RunResult:
    cfg, seed, out_dir = payload
    try:
        return run_one(cfg, seed, out_dir)
    except Exception:
        return RunResult(tag=cfg.cell_tag(), seed=seed, csv_path="", diverged=False,
                         failed=True, message=traceback.format_exc(limit=3))


def run_config(cfg: ExperimentConfig, out_dir: str) -> list[RunResult]:
    """All seeds of one config, sequentially."""
    return [run_one(cfg, seed, out_dir) for seed in cfg.seeds]


def run_sweep(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[RunResult]:
    """Every (cell, seed) of the sweep grid, up to ``workers`` at a time."""
    cells = expand_sweep(cfg)
    jobs = [(cell_cfg, seed, out_dir) for _, cell_cfg in cells for seed in cfg.seeds]
    if workers <= 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def apply_overrides(cfg: ExperimentConfig, *, fixed_iutd: float | None = None,
                    adaptive: bool = False, total_steps: int | None = None,
                    seeds: tuple[int, ...] | None = None) -> ExperimentConfig:
    """Command-line overrides on top of a parsed config."""
    controller = cfg.controller
    tag = cfg.tag
    if fixed_iutd is not None:
        controller = dataclasses.replace(controller, adaptive=False,
                                         initial_iutd=fixed_iutd)
        tag = ""
    if adaptive:
        controller = dataclasses.replace(controller, adaptive=True)
        tag = ""
    cfg = dataclasses.replace(cfg, controller=controller, tag=tag)
    if total_steps is not None:
        cfg = dataclasses.replace(cfg, total_steps=total_steps)
    if seeds is not None:
        cfg = dataclasses.replace(cfg, seeds=seeds)
    cfg.validate()
    return cfg
