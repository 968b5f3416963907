"""Exception types raised across the package."""


class SemExploreError(Exception):
    """Base class for package errors."""


class OutOfBounds(SemExploreError):
    """A world position or voxel index lies outside the grid."""


class ParseError(SemExploreError):
    """Scenario file is not valid JSON."""


class ValidationError(SemExploreError):
    """Scenario file violates the documented schema."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class RemoteUnavailable(SemExploreError):
    """Remote embedding service did not answer within the retry budget."""


class DegenerateFusion(SemExploreError):
    """Embedding fusion produced a near-zero vector (antipodal inputs)."""


class ClusterUnviewable(SemExploreError):
    """No valid viewpoint exists for a frontier cluster."""


class EmptyProblem(SemExploreError):
    """A tour/ordering problem was built with no destination nodes."""


class NoFrontiers(SemExploreError):
    """Planning requested but the map holds no frontier to explore."""
