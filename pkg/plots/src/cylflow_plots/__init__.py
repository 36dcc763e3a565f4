"""Figures for cylinder Ricci-flow trace CSVs with theoretical envelopes.

Consumes the flow package's two external file formats (the 28-column trace
CSV and the verify summary TSV) and renders the five standard figure
kinds; see cylflow_plots.render.KINDS.
"""

from .render import KINDS, PlotJob, RenderResult, render
from .traceio import SchemaError, read_summary, read_trace

__version__ = "0.1.0"
__all__ = ["KINDS", "PlotJob", "RenderResult", "render", "SchemaError",
           "read_summary", "read_trace", "__version__"]
