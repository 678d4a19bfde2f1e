"""Texture-based writing-style classification toolkit.

Dual-tree complex wavelet features over document blocks, classified by a
one-vs-one RBF support vector machine trained with an SMO solver written
from scratch. Includes a synthetic page generator, a CLI, and an
evaluation harness.
"""

from .exceptions import (
    BoundsError,
    ConvergenceError,
    DataError,
    DegenerateImageError,
    ModelFormatError,
    PgmParseError,
    SizeError,
    TexwaveError,
)
from .imagecore import BinaryImage, GrayImage, crop, load_pgm, save_pgm

__version__ = "0.1.0"

__all__ = [
    "BinaryImage",
    "BoundsError",
    "ConvergenceError",
    "DataError",
    "DegenerateImageError",
    "GrayImage",
    "ModelFormatError",
    "PgmParseError",
    "SizeError",
    "TexwaveError",
    "crop",
    "load_pgm",
    "save_pgm",
    "__version__",
]
