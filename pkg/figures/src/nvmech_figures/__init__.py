"""Publication-style figures rendered from simulation CSV/JSON results."""

__version__ = "0.1.0"

from .render import FIGURE_KINDS, PlotSpec, load_curve, render  # noqa: F401
