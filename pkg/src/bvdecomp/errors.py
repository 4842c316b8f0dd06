"""Exception hierarchy shared by all modules."""


class BVError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteValue(BVError):
    """A sample array contains NaN or infinity."""


class BadExponent(BVError):
    """Lebesgue exponent outside [1, inf)."""


class BadDimension(BVError):
    """Ambient dimension outside the supported range."""


class UnknownKind(BVError):
    """Fixture kind string not recognised."""


class ResolutionTooCoarse(BVError):
    """Grid spacing too coarse to resolve the requested feature."""


class IncompatibleTranslation(BVError):
    """Translation is not a multiple of the target grid spacing."""


class IncompatibleShift(BVError):
    """Group shift does not land on the anisotropic grid."""


class LevelOverflow(BVError):
    """Requested refinement level exceeds the configured cap."""


class EmptyWindow(BVError):
    """Scan level window contains no admissible level."""


class ZeroFunction(BVError):
    """Operation requires a nonzero function."""


class SupportViolation(BVError):
    """Postcomposition would destroy compact support (phi(0) != 0)."""


class NoPositiveSupremum(BVError):
    """Growth-ratio supremum is not positive."""


class NotAttained(BVError):
    """Supremum sits on the boundary of the sampled range."""


class LambdaOutOfRange(BVError):
    """Hardy coupling outside [0, N-1)."""


class NonConvergence(BVError):
    """Iterative solver hit its cap without converging."""


class NonConvergentTail(BVError):
    """Tail of a sequence failed the stabilization test."""


class WindowTooSmall(BVError):
    """Restriction window clips a non-negligible part of the mass."""


class BudgetExceeded(BVError):
    """Profile budget exhausted while concentration persists.

    Carries the partial decomposition in ``self.decomposition``.
    """

    def __init__(self, message, decomposition=None):
        super().__init__(message)
        self.decomposition = decomposition


class MismatchedDecomposition(BVError):
    """Decomposition does not belong to the given sequence."""


class SchemaError(BVError):
    """Scenario document failed schema validation."""


class EmptyCorpus(BVError):
    """No grid-function files found in the corpus directory."""


class StorageError(BVError):
    """Binary file is malformed or fails its checksum."""
