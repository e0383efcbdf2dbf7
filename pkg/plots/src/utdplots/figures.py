"""Figure rendering from report artifacts.

Consumes only the documented report schemas:

``aggregate.json``
    ``cells.<tag>.metrics.<name>`` holds ``point``, ``ci_low``,
    ``ci_high`` for the four aggregate metrics.
``efficiency__<tag>.csv``
    ``env_step, <metric>, ci_low, ci_high`` bootstrap series.
``curves__<tag>.csv``
    ``env_step, mean, std`` raw learning curves.
``iutd__<tag>.csv``
    ``env_step, iutd_mean, iutd_std`` ratio trajectories.

Four figure kinds: aggregate-metric bars with CI whiskers, sample
efficiency with shaded CI bands, learning curves with a shaded band of
one pointwise standard deviation, and ratio trajectories (same shading
convention; a band that is zero everywhere is dropped, so single-run
trajectories come out as a bare line). An optional odd-sized uniform
filter smooths the plotted series; windows shrink at the edges. Output
is a raster image, deterministic for fixed inputs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class PlotError(Exception):
    """Bad figure spec or input that does not match the report schema."""


FIGURE_KINDS = ("aggregate_bars", "efficiency", "learning_curves",
                "iutd_trajectory")
METRIC_NAMES = ("mean", "median", "iqm", "optimality_gap")

# (y column, band low, band high) per CSV-backed kind; None = derived
_CSV_SCHEMAS = {
    "efficiency": ("env_step", None, "ci_low", "ci_high"),
    "learning_curves": ("env_step", "mean", None, None),
    "iutd_trajectory": ("env_step", "iutd_mean", None, None),
}
_STD_COLUMNS = {"learning_curves": "std", "iutd_trajectory": "iutd_std"}


def uniform_filter(values, size: int) -> np.ndarray:
    """Moving average with an odd window that shrinks at the edges.

    Each output point averages the inputs within ``size // 2`` positions
    of it, so the series keeps its length and no padding values are
    invented; e.g. size 3 on [1, 2, 9] gives [1.5, 4, 5.5].
    """
    if size < 1 or size % 2 == 0:
        raise PlotError(f"filter size must be a positive odd integer, got {size}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise PlotError(f"filter input must be a non-empty vector, got shape {arr.shape}")
    half = size // 2
    return np.array([
        float(np.mean(arr[max(0, i - half): i + half + 1]))
        for i in range(arr.size)
    ])


@dataclass(frozen=True)
class FigureSpec:
    """One figure: input artifacts, kind, destination, presentation.

    ``inputs`` is the aggregate JSON for ``aggregate_bars`` and one CSV
    per cell otherwise. ``labels`` (legend entries, one per input)
    default to the ``<tag>`` part of each file name.
    ``smooth_window = 0`` disables smoothing.
    """

    kind: str
    inputs: tuple[str, ...]
    output: str
    labels: tuple[str, ...] = ()
    title: str = ""
    smooth_window: int = 0

    def validate(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; known: {FIGURE_KINDS}")
        if not self.inputs:
            raise PlotError("figure spec needs at least one input file")
        if self.kind == "aggregate_bars" and len(self.inputs) != 1:
            raise PlotError(
                f"aggregate_bars takes exactly one JSON input, got {len(self.inputs)}"
            )
        if self.labels and len(self.labels) != len(self.inputs):
            raise PlotError(
                f"{len(self.labels)} labels for {len(self.inputs)} inputs"
            )
        if self.smooth_window != 0 and (
            self.smooth_window < 1 or self.smooth_window % 2 == 0
        ):
            raise PlotError(
                f"smooth_window must be 0 or a positive odd integer, got {self.smooth_window}"
            )

    def label(self, index: int) -> str:
        if self.labels:
            return self.labels[index]
        return tag_from_path(self.inputs[index])


def tag_from_path(path: str) -> str:
    """Cell tag encoded in a report file name (``family__<tag>.csv``)."""
    stem = os.path.splitext(os.path.basename(path))[0]
    return stem.split("__", 1)[1] if "__" in stem else stem


def read_table(path: str, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Read a report CSV; a missing required column is named in the error."""
    if not os.path.isfile(path):
        raise PlotError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    for column in required:
        if column not in header:
            raise PlotError(f"{path}: missing column {column!r} (found {header})")
    if not rows:
        raise PlotError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise PlotError(f"{path}: non-numeric cell ({exc})") from None
    if data.shape[1] != len(header):
        raise PlotError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(header)}


def read_aggregate(path: str) -> dict:
    if not os.path.isfile(path):
        raise PlotError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PlotError(f"{path}: invalid JSON ({exc})") from None
    if "cells" not in payload or not payload["cells"]:
        raise PlotError(f"{path}: missing column 'cells' (no cell summaries)")
    for tag, cell in payload["cells"].items():
        if "metrics" not in cell:
            raise PlotError(f"{path}: cell {tag!r}: missing column 'metrics'")
        for name in METRIC_NAMES:
            if name not in cell["metrics"]:
                raise PlotError(f"{path}: cell {tag!r}: missing column {name!r}")
    return payload


def _smooth(spec: FigureSpec, series: np.ndarray) -> np.ndarray:
    if spec.smooth_window == 0:
        return series
    return uniform_filter(series, spec.smooth_window)


def _build_aggregate_bars(spec: FigureSpec, axes) -> None:
    payload = read_aggregate(spec.inputs[0])
    tags = sorted(payload["cells"])
    positions = np.arange(len(tags))
    for ax, name in zip(axes, METRIC_NAMES):
        points = np.array([
            payload["cells"][t]["metrics"][name]["point"] for t in tags
        ])
        lows = np.array([
            payload["cells"][t]["metrics"][name]["ci_low"] for t in tags
        ])
        highs = np.array([
            payload["cells"][t]["metrics"][name]["ci_high"] for t in tags
        ])
        # percentile intervals straddle the point estimate; clip guards
        # against the degenerate single-run case collapsing below zero
        yerr = np.vstack([
            np.maximum(0.0, points - lows), np.maximum(0.0, highs - points)
        ])
        ax.bar(positions, points, yerr=yerr, capsize=4, color="tab:blue",
               edgecolor="black", linewidth=0.6)
        ax.set_xticks(positions)
        ax.set_xticklabels(tags, rotation=20, ha="right", fontsize=8)
        ax.set_title(name)
        ax.grid(axis="y", alpha=0.3)


def _build_band_lines(spec: FigureSpec, ax) -> None:
    y_col = _CSV_SCHEMAS[spec.kind][1]
    for i, path in enumerate(spec.inputs):
        if spec.kind == "efficiency":
            table = read_table(path, ("env_step", "ci_low", "ci_high"))
            extras = [c for c in table
                      if c not in ("env_step", "ci_low", "ci_high")]
            if len(extras) != 1:
                raise PlotError(
                    f"{path}: expected exactly one metric column, found {extras}"
                )
            y = table[extras[0]]
            low, high = table["ci_low"], table["ci_high"]
        else:
            std_col = _STD_COLUMNS[spec.kind]
            table = read_table(path, ("env_step", y_col, std_col))
            y = table[y_col]
            low, high = y - table[std_col], y + table[std_col]
        steps = table["env_step"]
        line, = ax.plot(steps, _smooth(spec, y), label=spec.label(i))
        if np.any(high > low):
            ax.fill_between(steps, _smooth(spec, low), _smooth(spec, high),
                            color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("environment steps")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)


def _build(spec: FigureSpec):
    """Assemble the matplotlib figure for ``spec`` (not yet saved)."""
    spec.validate()
    if spec.kind == "aggregate_bars":
        fig, axes = plt.subplots(1, len(METRIC_NAMES), figsize=(11, 3.2))
        _build_aggregate_bars(spec, axes)
    else:
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        _build_band_lines(spec, ax)
        ax.set_ylabel({
            "efficiency": "aggregate score",
            "learning_curves": "score",
            "iutd_trajectory": "env steps per update",
        }[spec.kind])
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Render ``spec`` to its output path; returns that path."""
    fig = _build(spec)
    out_dir = os.path.dirname(spec.output)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    try:
        fig.savefig(spec.output, dpi=120)
    finally:
        plt.close(fig)
    return spec.output
