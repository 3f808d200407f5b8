"""Exception and warning classes raised across the package."""


class FlowShortcutError(Exception):
    """Base class for all package errors."""


class DomainError(FlowShortcutError, ValueError):
    """Input outside the mathematical domain of an operation."""


class OutOfRangeError(DomainError):
    """Query level or position outside the tabulated range."""


class GridMismatchError(FlowShortcutError, ValueError):
    """Fields defined on incompatible grids."""


class TruncationError(FlowShortcutError):
    """Grid too narrow: the state has non-negligible weight at the edges."""


class ConsistencyError(FlowShortcutError):
    """Internal consistency check failed (e.g. node count mismatch)."""


class TrackingError(FlowShortcutError):
    """Eigenstate could not be followed continuously between time samples."""


class NumericalResolutionError(FlowShortcutError):
    """Velocity cap hit away from any flux-carrying node: refine the mesh."""


class SingularityError(FlowShortcutError):
    """Flow field invalid inside the probability core."""


class TopologyError(FlowShortcutError):
    """Node count or energy-shell topology unsuitable for the method."""


class GaugeConsistencyError(FlowShortcutError):
    """Hamilton-Jacobi residual of the companion phase exceeds tolerance."""


class StepSizeError(FlowShortcutError):
    """Norm drift during propagation: reduce the time step."""


class BoundaryError(FlowShortcutError):
    """Wavefunction reached the edge of the grid."""


class SingularOperatorError(FlowShortcutError):
    """Implicit step could not be solved."""


class EscapeError(FlowShortcutError):
    """A classical trajectory left the bound region."""


class ConfigError(FlowShortcutError, ValueError):
    """Invalid experiment configuration; message carries the key path."""


class SingularityWarning(UserWarning):
    """Velocity cap hit at a node that carries probability flux."""


class SpectralBoundaryWarning(UserWarning):
    """Spectral derivative applied to a field that does not vanish at the edges."""


class EscapeWarning(UserWarning):
    """Langevin particles crossed the grid boundary and were reflected."""
