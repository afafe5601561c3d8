"""Exception types shared across the library.

The CLI maps these onto exit codes: invalid input -> 2, I/O -> 3,
hypothesis failure (equivalence / support change) -> 4.
"""


class GraphScatterError(Exception):
    """Base class for all library errors."""


class InvalidInputError(GraphScatterError):
    """Malformed user input (bad indices, bad file contents, bad parameters)."""


class NonSymmetricInputError(InvalidInputError):
    """Conflicting values supplied for (x, y) and (y, x) of an edge weight."""


class NonPositiveMeasureError(InvalidInputError):
    """A vertex measure entry is zero or negative."""


class SelfLoopError(InvalidInputError):
    """A nonzero diagonal edge weight b(x, x) was supplied."""


class NegativeEdgeWeightError(InvalidInputError):
    """An edge weight became negative (directly or after perturbation)."""


class InvalidLabelError(InvalidInputError):
    """A cone-tree root label outside {1..N}."""


class DimensionMismatchError(InvalidInputError):
    """Vector or matrix dimensions do not match the graph."""


class NotAntisymmetricError(InvalidInputError):
    """An edge function required to be antisymmetric is not."""


class NonPositiveTimeError(InvalidInputError):
    """Semigroup time parameter s <= 0."""


class UnsupportedDimensionError(InvalidInputError):
    """Closed-form lattice density requested for d not in {1, 2, 3}."""


class TooLargeForDenseError(GraphScatterError):
    """Graph exceeds the dense-solver vertex cap."""


class ToleranceNotReachedError(GraphScatterError):
    """An iterative method could not reach the requested tolerance."""


class TimeMismatchError(InvalidInputError):
    """Heat kernels passed to a criterion were computed at different times."""


class NotApplicableError(GraphScatterError):
    """Criterion hypotheses fail: weight equivalence broken or edge support changed."""

    def __init__(self, message, support_changes=()):
        super().__init__(message)
        self.support_changes = list(support_changes)


class EmptySphereError(GraphScatterError):
    """Reserved: empty spheres are handled as zero contribution, never raised."""


class NoPhysicalRootError(GraphScatterError):
    """Green-function branch selection failed to find the physical root."""


class NoConvergenceError(GraphScatterError):
    """Fixed-point iteration exhausted max_iter; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IncompatibleGridsError(InvalidInputError):
    """Density grids cannot be compared (no overlap and resampling disabled)."""
