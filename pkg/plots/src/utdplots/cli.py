"""Render every figure for a report directory.

Usage::

    utdplots --report DIR [--out DIR] [--smooth N]

Reads ``aggregate.json`` plus the per-cell ``efficiency__*.csv``,
``curves__*.csv`` and ``iutd__*.csv`` files and writes one image per
figure kind (cells overlaid) into ``--out`` (default:
``<report>/figures``). ``--smooth`` applies an odd-sized uniform filter
to the line figures.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

from .figures import FigureSpec, PlotError, render

# figure kind -> (input file family, output image name)
_FAMILIES = (
    ("aggregate_bars", "aggregate.json", "aggregate_metrics.png"),
    ("efficiency", "efficiency__*.csv", "sample_efficiency.png"),
    ("learning_curves", "curves__*.csv", "learning_curves.png"),
    ("iutd_trajectory", "iutd__*.csv", "iutd_trajectories.png"),
)


def build_specs(report_dir: str, out_dir: str, smooth: int = 0) -> list[FigureSpec]:
    """One spec per figure kind found in ``report_dir``."""
    if not os.path.isdir(report_dir):
        raise PlotError(f"report directory not found: {report_dir}")
    specs = []
    for kind, pattern, image in _FAMILIES:
        inputs = tuple(sorted(glob.glob(os.path.join(report_dir, pattern))))
        if not inputs:
            raise PlotError(f"no {pattern} in {report_dir}")
        smooth_window = 0 if kind == "aggregate_bars" else smooth
        specs.append(FigureSpec(
            kind=kind, inputs=inputs, output=os.path.join(out_dir, image),
            smooth_window=smooth_window,
        ))
    return specs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="utdplots",
        description="Render report figures: metric bars, efficiency curves, "
                    "learning curves, ratio trajectories.",
    )
    parser.add_argument("--report", required=True, help="report directory")
    parser.add_argument("--out", default=None,
                        help="image directory (default: <report>/figures)")
    parser.add_argument("--smooth", type=int, default=0,
                        help="odd uniform-filter size for line figures (0 = off)")
    args = parser.parse_args(argv)
    out_dir = args.out or os.path.join(args.report, "figures")
    try:
        for spec in build_specs(args.report, out_dir, smooth=args.smooth):
            print(f"wrote {render(spec)}")
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
