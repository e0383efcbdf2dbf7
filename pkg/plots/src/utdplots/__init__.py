"""Figure rendering for report directories produced by utdctl."""

from .figures import FIGURE_KINDS, FigureSpec, PlotError, render, uniform_filter

__all__ = ["FIGURE_KINDS", "FigureSpec", "PlotError", "render", "uniform_filter"]
