"""Exception types shared across the package."""


class TexwaveError(Exception):
    """Base class for all errors raised by this package."""


class PgmParseError(TexwaveError, ValueError):
    """Raised when PGM bytes cannot be parsed.

    Parameters
    ----------
    message : str
        Human-readable description of the problem.
    offset : int
        Byte offset in the input at which the problem was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ModelFormatError(TexwaveError, ValueError):
    """Raised when a model file is malformed or has an unsupported version."""


class BoundsError(TexwaveError, ValueError):
    """Raised when a requested rectangle falls outside an image."""


class SizeError(TexwaveError, ValueError):
    """Raised when an input is too small (or oddly shaped) for an operation."""


class DegenerateImageError(TexwaveError, ValueError):
    """Raised when an image has a single intensity level and cannot be thresholded."""


class DataError(TexwaveError, ValueError):
    """Raised when dataset inputs (manifests, pages, truth grids) are unusable.

    Messages name every offending file so a batch with several bad pages
    reports them all at once.
    """


class ConvergenceError(TexwaveError, RuntimeError):
    """Raised when the SVM solver fails to reach its stopping criterion.

    Attributes
    ----------
    worst_violation : float
        Largest KKT violation remaining when the iteration cap was hit.
    """

    def __init__(self, message, worst_violation=float("nan")):
        super().__init__(message)
        self.worst_violation = worst_violation
