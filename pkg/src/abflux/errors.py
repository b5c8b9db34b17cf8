"""Exception types shared across the package.

Everything raised on purpose derives from :class:`AbfluxError` so callers
(and the CLI) can tell physics/numerics failures apart from bugs.  Config
problems get their own branch (:class:`ConfigError`) because the CLI maps
them to a different exit code than numerical failures.
"""


class AbfluxError(Exception):
    """Base class for all errors raised deliberately by this package."""


# field evaluation


class SingularPoint(AbfluxError):
    """A potential or field was evaluated within the exclusion distance of its singular set."""


# path integration


class NoConvergence(AbfluxError):
    """Adaptive quadrature hit its depth cap before meeting tolerance."""


class NonPlanarContour(AbfluxError):
    """The contour does not lie on a supported integration surface."""


class PointOnContour(AbfluxError):
    """Winding number is undefined for a point lying on the contour itself."""


# lattice and propagation


class PacketTooNarrow(AbfluxError):
    """Requested packet width is below the resolvable limit of the grid."""


class PacketOverlapsWall(AbfluxError):
    """Too much of the packet's norm would be clipped by hard-wall nodes."""


class SingularEdge(AbfluxError):
    """A lattice edge between usable nodes passes through a field singularity."""


class LinearSolveFailure(AbfluxError):
    """A tridiagonal sweep produced non-finite values."""


class RegionNotSimplyConnected(AbfluxError):
    """Lattice phase construction found inconsistent holonomy inside the region."""


class AnchorOutsideRegion(AbfluxError):
    """The phase-construction anchor node is not part of the region."""


class GridMismatch(AbfluxError):
    """Snapshots disagree in grid layout or are not equally spaced in time."""


# experiments


class NoTransmission(AbfluxError):
    """Effectively nothing made it past the barrier; no pattern to analyze."""


class NoFringe(AbfluxError):
    """The detector record has no resolvable fringe to extract a phase from."""


class InconsistentState(AbfluxError):
    """Ring state is not single-valued; fluxoid residual exceeds tolerance."""


class SingularEncounter(AbfluxError):
    """A classical trajectory passed within the exclusion distance of a singularity."""


# configuration


class ConfigError(AbfluxError):
    """Base class for run-configuration problems (CLI exit code 2)."""


class SchemaError(ConfigError):
    """Config file is structurally invalid (bad JSON, unknown or missing keys, wrong types)."""


class RangeError(ConfigError):
    """Config values are structurally fine but violate a documented constraint."""
