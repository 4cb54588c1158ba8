"""Figure rendering for cintlab scenario outputs."""

from .renderer import FigureSpec, render, main

__version__ = "0.1.0"
