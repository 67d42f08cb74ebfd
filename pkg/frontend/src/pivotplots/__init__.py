"""pivotplots: render pivotlab's tabular outputs into figures."""

__version__ = "0.1.0"

from .specs import FigureSpec, load_spec
from .render import render

__all__ = ["FigureSpec", "load_spec", "render"]
