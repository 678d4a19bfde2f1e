"""Binarization, block partitioning, and empty-block rejection.

Pages are thresholded with Otsu's method over a 256-bin histogram, cut
into a block grid (non-overlapping by default), and blocks whose
ink-to-background ratio falls below a threshold are dropped so margins
and inter-paragraph gaps never reach the classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateImageError, SizeError
from .imagecore import BinaryImage, GrayImage

__all__ = [
    "Block",
    "BlockGridConfig",
    "otsu_threshold",
    "binarize",
    "partition_blocks",
    "is_empty",
    "extract_occupied_blocks",
]

_BINS = 256


@dataclass(frozen=True)
class Block:
    """One rectangle cut from a source page."""

    origin_x: int
    origin_y: int
    width: int
    height: int
    pixels: GrayImage

    def __post_init__(self):
        if self.pixels.width != self.width or self.pixels.height != self.height:
            raise ValueError(
                f"block content {self.pixels.width}x{self.pixels.height} does not "
                f"match declared size {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class BlockGridConfig:
    """Block grid geometry and the emptiness threshold.

    stride defaults to the block size (non-overlapping tiling); smaller
    strides give overlapping blocks.
    """

    block_width: int = 96
    block_height: int = 96
    stride_x: int = None
    stride_y: int = None
    ink_ratio_threshold: float = 0.05

    def __post_init__(self):
        if self.stride_x is None:
            object.__setattr__(self, "stride_x", self.block_width)
        if self.stride_y is None:
            object.__setattr__(self, "stride_y", self.block_height)
        if self.block_width < 16 or self.block_height < 16:
            raise ValueError(
                f"block size must be >= 16, got "
                f"{self.block_width}x{self.block_height}"
            )
        if self.stride_x < 1 or self.stride_y < 1:
            raise ValueError(
                f"stride must be >= 1, got {self.stride_x}x{self.stride_y}"
            )
        if not 0.0 < self.ink_ratio_threshold < 1.0:
            raise ValueError(
                f"ink_ratio_threshold must be in (0, 1), got "
                f"{self.ink_ratio_threshold}"
            )


def _histogram(img):
    """256-bin histogram of intensities; bin k covers [k/256, (k+1)/256)."""
    data = img.data if isinstance(img, GrayImage) else np.asarray(img)
    bins = np.minimum((data * _BINS).astype(np.int64), _BINS - 1)
    return np.bincount(bins.ravel(), minlength=_BINS).astype(np.float64)


def otsu_threshold(img):
    """Histogram threshold maximizing between-class variance.

    Scans all 255 bin boundaries; class 0 is the bins below the
    boundary. Ties resolve to the smallest qualifying boundary. The
    returned value is the boundary as an intensity, boundary/256.

    Raises
    ------
    DegenerateImageError
        If every pixel lands in one histogram bin.
    """
    hist = _histogram(img)
    if np.count_nonzero(hist) < 2:
        raise DegenerateImageError(
            "image has a single quantized intensity level; cannot threshold"
        )
    total = hist.sum()
    idx = np.arange(_BINS, dtype=np.float64)
    w0 = np.cumsum(hist)[:-1]  # pixels strictly below boundary t = 1..255
    mu0_sum = np.cumsum(hist * idx)[:-1]
    w1 = total - w0
    mu_total = (hist * idx).sum()
    valid = (w0 > 0) & (w1 > 0)
    between = np.zeros(_BINS - 1)
    np.divide(
        (mu_total * w0 - total * mu0_sum) ** 2,
        w0 * w1,
        out=between,
        where=valid,
    )
    best = int(np.argmax(between))  # argmax returns the first (smallest) maximizer
    return (best + 1) / _BINS


def binarize(img, t):
    """Mark pixels strictly darker than t as ink."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {t}")
    data = img.data if isinstance(img, GrayImage) else np.asarray(img)
    return BinaryImage(data < t)


def partition_blocks(img, cfg=None):
    """Cut the page into blocks at the configured stride, row-major.

    Trailing strips narrower than a block are discarded.

    Raises
    ------
    SizeError
        If the page cannot hold even one block.
    """
    if cfg is None:
        cfg = BlockGridConfig()
    if img.width < cfg.block_width or img.height < cfg.block_height:
        raise SizeError(
            f"page {img.width}x{img.height} smaller than one "
            f"{cfg.block_width}x{cfg.block_height} block"
        )
    blocks = []
    for y in range(0, img.height - cfg.block_height + 1, cfg.stride_y):
        for x in range(0, img.width - cfg.block_width + 1, cfg.stride_x):
            content = GrayImage(
                img.data[y : y + cfg.block_height, x : x + cfg.block_width]
            )
            blocks.append(Block(x, y, cfg.block_width, cfg.block_height, content))
    return blocks


def is_empty(block, binary, threshold):
    """True iff the block's ink-to-background pixel ratio is below threshold.

    The comparison is strict, so a ratio exactly at the threshold keeps
    the block. A block with no background pixels is never empty.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    ink = int(np.count_nonzero(binary.data))
    background = binary.data.size - ink
    if background == 0:
        return False
    return ink / background < threshold


def extract_occupied_blocks(page, cfg=None):
    """Partition a page and drop empty blocks in one pass.

    Thresholds the whole page once with Otsu's method, then rejects
    blocks by their ink ratio. Returns (blocks, threshold).
    """
    if cfg is None:
        cfg = BlockGridConfig()
    t = otsu_threshold(page)
    mask = binarize(page, t)
    kept = []
    for block in partition_blocks(page, cfg):
        piece = BinaryImage(
            mask.data[
                block.origin_y : block.origin_y + block.height,
                block.origin_x : block.origin_x + block.width,
            ]
        )
        if not is_empty(block, piece, cfg.ink_ratio_threshold):
            kept.append(block)
    return kept, t
