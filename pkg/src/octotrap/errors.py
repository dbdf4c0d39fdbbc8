"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`OctotrapError`
so the CLI can map it to an exit code.
"""


class OctotrapError(Exception):
    """Base class for all package errors."""


class ConfigError(OctotrapError):
    """Invalid geometry file, run configuration or parameters."""


class GeometryError(OctotrapError):
    """Malformed or intersecting electrode geometry."""


class SingularPointError(OctotrapError):
    """A potential was requested on top of a charge element."""


class QuadratureError(OctotrapError):
    """Numerical quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class DegenerateConstructionError(OctotrapError):
    """A charge construction has no non-trivial solution."""


class ConstructionInfeasibleError(OctotrapError):
    """Root finding for a charge construction failed to find a solution."""


class SolverError(OctotrapError):
    """Linear solve failed or was ill conditioned."""


class ConvergenceError(OctotrapError):
    """An iterative procedure did not converge."""


class AntiConfinedError(OctotrapError):
    """The axial potential does not confine the ion pair."""


class CollisionError(OctotrapError):
    """Two ions came closer than the collision threshold."""


class IndeterminateError(OctotrapError):
    """A quantity could not be determined from the available data."""


class UnderdeterminedDesignError(OctotrapError):
    """The free voltages cannot satisfy the requested constraints."""
