"""Static figure rendering for curve-pair kernel experiment artifacts."""

__version__ = "0.1.0"

from .render import FigureJob, KINDS, SchemaError, render
