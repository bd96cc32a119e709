"""Figure rendering for simulator sweep summaries."""

from .render import KINDS, PlotError, PlotSpec, render

__version__ = "0.1.0"

__all__ = ["KINDS", "PlotError", "PlotSpec", "render"]
