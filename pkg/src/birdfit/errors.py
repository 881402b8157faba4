"""Exception types shared across the package."""
from __future__ import annotations


class BirdfitError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"

    def oneline(self) -> str:
        """Single-line machine-parseable form used by the CLI."""
        return f"{self.code}: {self}"


class DimensionMismatchError(BirdfitError):
    """An input array does not have the shape a contract requires."""

    code = "dimension-mismatch"

    def __init__(self, field: str, expected, got):
        self.field = field
        self.expected = expected
        self.got = got
        super().__init__(f"field '{field}' expected shape {expected}, got {got}")


class ModelValidationError(BirdfitError):
    """A skeleton model violates a structural invariant."""

    code = "invalid-model"


class ProjectionError(BirdfitError):
    """A 3D point cannot be projected (non-positive depth)."""

    code = "bad-depth"

    def __init__(self, index: int, depth: float):
        self.index = index
        self.depth = depth
        super().__init__(f"point {index} has non-positive depth {depth:g}")


class UninitializableFrameError(BirdfitError):
    """A frame has no confident keypoints to initialize from."""

    code = "uninitializable-frame"


class FitDivergedError(BirdfitError):
    """The optimizer produced a non-finite loss or gradient."""

    code = "fit-diverged"

    def __init__(self, iteration: int, stage: int, term: str):
        self.iteration = iteration
        self.stage = stage
        self.term = term
        super().__init__(
            f"non-finite value in term '{term}' at stage {stage} iteration {iteration}"
        )


class MetricsError(BirdfitError):
    """Metric inputs are degenerate (no visible keypoints, too few frames)."""

    code = "bad-metric-input"


class FileFormatError(BirdfitError):
    """An input file does not follow its documented schema."""

    code = "bad-file"


class InvalidSpecError(BirdfitError):
    """A generation or grid spec has out-of-range or inconsistent fields."""

    code = "invalid-spec"
