"""Exception hierarchy. Every error names the module it originated from."""


class CylflowError(Exception):
    """Base error; ``module`` identifies the subsystem that raised it."""

    module = "cylflow"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class GeometryError(CylflowError):
    module = "geometry"


class ScenarioError(CylflowError):
    module = "scenarios"


class SolverError(CylflowError):
    """Solver failure; ``trace`` carries the records accumulated before the
    abort so callers can inspect or persist the partial run."""

    module = "solver"

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NormalizationError(CylflowError):
    module = "normalization"


class AnalysisError(CylflowError):
    module = "analysis"


class ConfigError(CylflowError):
    module = "cli_io"
