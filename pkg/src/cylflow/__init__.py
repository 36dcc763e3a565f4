"""Ricci flow on cylindrical surfaces with fixed boundary geodesic curvature.

A numpy/scipy library for integrating the conformal-gauge flow
``w_t = e^{-2w} (Delta0 w - R0/2)`` on S^1 x [-rho, rho] with the Robin
condition that pins the boundary geodesic curvature, together with the
offline area-normalisation and the verification harness for the flow's
asymptotic behaviour (decay of the total curvature, curvature blow-up, and
slower-than-exponential convergence of the normalised flow).
"""

from . import analysis, cli_io, geometry, normalization, presets, scenarios, solver
from .errors import (AnalysisError, ConfigError, CylflowError, GeometryError,
                     NormalizationError, ScenarioError, SolverError)

__version__ = "0.1.0"

__all__ = [
    "analysis", "cli_io", "geometry", "normalization", "presets", "scenarios",
    "solver", "CylflowError", "GeometryError", "ScenarioError", "SolverError",
    "NormalizationError", "AnalysisError", "ConfigError", "__version__",
]
