from .render import KINDS, FigureSpec, RenderError, render

__version__ = "0.1.0"
