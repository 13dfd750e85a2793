"""Exception hierarchy shared by every module in the package."""


class StochRouteError(Exception):
    """Base class for all package errors."""


class ParameterError(StochRouteError, ValueError):
    """An argument is outside its valid range."""


class GridMismatchError(StochRouteError, ValueError):
    """Two distributions combined in one operation live on different time grids."""


class NodeLookupError(StochRouteError, KeyError):
    """A node id is not part of the network."""


class PolicyError(StochRouteError):
    """A successor-selection policy received unusable input."""


class ConvergenceError(StochRouteError):
    """Value iteration hit its iteration cap before the bounds met."""

    def __init__(self, message, residual, iterations):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class EstimationError(StochRouteError):
    """No edges are available to build an estimation context."""


class TrappedError(StochRouteError):
    """The known subgraph has no frontier left and the target was not reached."""


class FitError(StochRouteError):
    """Too little data to fit a distance model."""


class TNTPParseError(StochRouteError, ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class IntegrityError(StochRouteError, ValueError):
    """Network data is internally inconsistent (e.g. an edge refers to a missing node)."""


class ConfigError(StochRouteError, ValueError):
    """An experiment configuration failed validation."""
