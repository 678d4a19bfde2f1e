"""Deterministic generator of text-like texture pages.

Pages are white canvases covered with dark pseudo-glyph strokes whose
orientation statistics, thickness, density, slant, and weight are set per
style class.  Three noise regimes degrade pages: none (identity), low
(additive Gaussian), and high (iterated blur / quantize / threshold-jitter,
a software stand-in for repeated photocopying).

Randomness
----------
All randomness derives from documented, portable 64-bit integer mixers so
outputs are bit-stable across implementations:

* ``splitmix64(x)``: z = x + 0x9E3779B97F4A7C15;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31),
  all modulo 2^64.
* ``Xorshift64Star``: sequential stream with state update
  s ^= s >> 12; s ^= s << 25; s ^= s >> 27 (modulo 2^64) and output
  (s * 0x2545F4914F6CDD1D) mod 2^64; the initial state is
  splitmix64(seed), replaced by 0x9E3779B97F4A7C15 if zero.
* Bulk per-pixel fields are counter-based: lane k applies one
  xorshift64* step to state splitmix64((seed + k) mod 2^64).
* A 64-bit word w becomes a float in [0, 1) as (w >> 11) * 2^-53.
  Normal deviates use the Box-Muller transform
  z = sqrt(-2 ln u1) * cos(2 pi u2) with u1 nudged away from zero by
  2^-54.

Seed mixing: ``mix_seed(p1, p2, ...)`` chains h = splitmix64(h + p_i)
starting from h = 0.  Page seeds are mix_seed(base_seed, style_index,
page_index); per-page noise seeds and per-region collage seeds derive the
same way (see gen_dataset / make_collage).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from .exceptions import SizeError
from .imagecore import GrayImage, save_pgm

_MASK64 = (1 << 64) - 1

# Stroke geometry: length range in pixels and ink darkness (0 = black).
_STROKE_MIN_LEN = 10.0
_STROKE_MAX_LEN = 22.0
_INK_DARKNESS = 0.92

# High-noise regime: gray levels used by the quantize step.
_PHOTOCOPY_LEVELS = 16

_FORBIDDEN_ID_CHARS = set(',\n\r/\\')


def splitmix64(x):
    """One splitmix64 step on a Python integer (see module docstring)."""
    z = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(*parts):
    """Combine integers into one 64-bit seed: h = splitmix64(h + part)."""
    h = 0
    for part in parts:
        h = splitmix64((h + int(part)) & _MASK64)
    return h


class Xorshift64Star:
    """Sequential xorshift64* stream (shift constants 12, 25, 27)."""

    _MULT = 0x2545F4914F6CDD1D

    def __init__(self, seed):
        state = splitmix64(seed)
        self._state = state if state != 0 else 0x9E3779B97F4A7C15

    def next_u64(self):
        s = self._state
        s ^= s >> 12
        s = (s ^ (s << 25)) & _MASK64
        s ^= s >> 27
        self._state = s
        return (s * self._MULT) & _MASK64

    def uniform(self, lo=0.0, hi=1.0):
        """Uniform float in [lo, hi) from the top 53 bits of one word."""
        u = (self.next_u64() >> 11) * 2.0 ** -53
        return lo + (hi - lo) * u


def _field_u64(seed, count):
    """Counter-based vector of ``count`` 64-bit words (see docstring)."""
    k = np.arange(count, dtype=np.uint64)
    z = k + np.uint64(seed & _MASK64)
    # splitmix64, vectorized
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    # one xorshift64* step
    z = np.where(z == 0, np.uint64(0x9E3779B97F4A7C15), z)
    z = z ^ (z >> np.uint64(12))
    z = z ^ (z << np.uint64(25))
    z = z ^ (z >> np.uint64(27))
    return z * np.uint64(0x2545F4914F6CDD1D)


def uniform_field(seed, shape):
    """Array of uniforms in [0, 1), bit-stable for a given seed."""
    count = int(np.prod(shape))
    u = (_field_u64(seed, count) >> np.uint64(11)).astype(np.float64)
    return (u * 2.0 ** -53).reshape(shape)


def normal_field(seed, shape):
    """Array of standard normal deviates via Box-Muller."""
    u1 = uniform_field(mix_seed(seed, 1), shape) + 2.0 ** -54
    u2 = uniform_field(mix_seed(seed, 2), shape)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class StyleSpec:
    """Parametric description of one writing-style class.

    Angles are degrees; a stroke's direction is drawn uniformly from
    [orientation_mean - orientation_spread, mean + spread].  ``slant``
    shears stroke offsets horizontally by ``slant * dy`` (italic
    emulation); ``weight`` multiplies the stroke thickness (bold
    emulation).  ``density`` is the expected stroke count per 96x96 area.
    """

    class_id: str
    orientation_mean: float
    orientation_spread: float
    thickness: float
    density: float
    slant: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if not self.class_id:
            raise ValueError("class_id must be non-empty")
        bad = _FORBIDDEN_ID_CHARS & set(self.class_id)
        if bad:
            raise ValueError(
                f"class_id {self.class_id!r} contains forbidden "
                f"characters {sorted(bad)}"
            )
        if self.thickness < 1.0:
            raise ValueError(f"thickness must be >= 1 px, got {self.thickness}")
        if self.density <= 0.0:
            raise ValueError(f"density must be > 0, got {self.density}")
        if self.orientation_spread < 0.0:
            raise ValueError("orientation_spread must be >= 0")
        if self.weight <= 0.0:
            raise ValueError(f"weight must be > 0, got {self.weight}")

    def parameters(self):
        """Tuple of the style parameters that define distinctness."""
        return (self.orientation_mean, self.orientation_spread,
                self.thickness, self.density, self.slant, self.weight)


def validate_styles(styles):
    """Check class-id uniqueness and pairwise parameter distinctness.

    Raises ValueError naming the offending pair if two styles share all
    parameters or two styles share a class id.
    """
    styles = list(styles)
    seen = {}
    for s in styles:
        if s.class_id in seen:
            raise ValueError(f"duplicate class_id {s.class_id!r}")
        seen[s.class_id] = s
    for i in range(len(styles)):
        for j in range(i + 1, len(styles)):
            if styles[i].parameters() == styles[j].parameters():
                raise ValueError(
                    f"styles {styles[i].class_id!r} and "
                    f"{styles[j].class_id!r} have identical parameters"
                )
    return styles


@dataclass(frozen=True)
class NoiseSpec:
    """Noise regime configuration.

    regime "none" is the identity.  "low" adds clamped Gaussian noise of
    standard deviation ``sigma``.  "high" runs ``iterations`` rounds of
    gaussian blur (``blur_radius``), quantization to 16 gray levels, and
    re-binarization at a per-pixel threshold 0.5 + jitter*(2u-1).
    """

    regime: str = "none"
    sigma: float = 0.05
    iterations: int = 10
    blur_radius: float = 0.5
    jitter: float = 0.06
    seed: int = 0

    def __post_init__(self):
        if self.regime not in ("none", "low", "high"):
            raise ValueError(f"unknown noise regime {self.regime!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.blur_radius <= 0:
            raise ValueError("blur_radius must be > 0")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")


def render_page(style, width, height, seed):
    """Render one page of pseudo-glyph strokes for a style.

    The page starts white (1.0); each stroke darkens an anti-aliased
    capsule (thick line segment with rounded caps).  Stroke count is
    density * (width*height) / 96^2 rounded to nearest.  Identical
    (style, width, height, seed) always yields the identical image.

    Raises
    ------
    SizeError
        If either dimension is below 192.
    """
    if width < 192 or height < 192:
        raise SizeError(
            f"page dimensions must be >= 192x192, got {width}x{height}"
        )
    rng = Xorshift64Star(seed)
    page = np.ones((height, width), dtype=np.float64)
    n_strokes = int(round(style.density * (width * height) / 9216.0))
    thickness = style.thickness * style.weight
    for _ in range(n_strokes):
        cx = rng.uniform(0.0, width)
        cy = rng.uniform(0.0, height)
        theta = math.radians(
            style.orientation_mean
            + rng.uniform(-style.orientation_spread, style.orientation_spread)
        )
        length = rng.uniform(_STROKE_MIN_LEN, _STROKE_MAX_LEN)
        # Direction: theta = 0 is horizontal, 90 points up the page.
        ex = math.cos(theta)
        ey = -math.sin(theta)
        # Italic shear: offset x grows with the vertical offset.
        half = length / 2.0
        ox = (ex + style.slant * ey) * half
        oy = ey * half
        ax, ay = cx - ox, cy - oy
        bx, by = cx + ox, cy + oy
        _draw_capsule(page, ax, ay, bx, by, thickness)
    return GrayImage(page)


def _draw_capsule(page, ax, ay, bx, by, thickness):
    """Darken an anti-aliased thick segment from A to B in place."""
    height, width = page.shape
    radius = thickness / 2.0
    pad = radius + 1.5
    x0 = max(0, int(math.floor(min(ax, bx) - pad)))
    x1 = min(width, int(math.ceil(max(ax, bx) + pad)) + 1)
    y0 = max(0, int(math.floor(min(ay, by) - pad)))
    y1 = min(height, int(math.ceil(max(ay, by) + pad)) + 1)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    px = xs + 0.5 - ax
    py = ys + 0.5 - ay
    dx = bx - ax
    dy = by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq <= 1e-12:
        t = np.zeros_like(px)
    else:
        t = np.clip((px * dx + py * dy) / seg_sq, 0.0, 1.0)
    distx = px - t * dx
    disty = py - t * dy
    dist = np.hypot(distx, disty)
    coverage = np.clip(radius + 0.5 - dist, 0.0, 1.0) * _INK_DARKNESS
    region = page[y0:y1, x0:x1]
    np.minimum(region, 1.0 - coverage, out=region)


def apply_noise(img, spec):
    """Degrade a page according to a NoiseSpec (see class docstring)."""
    if spec.regime == "none":
        return img
    if spec.regime == "low":
        noise = normal_field(spec.seed, img.data.shape)
        return GrayImage(np.clip(img.data + spec.sigma * noise, 0.0, 1.0))
    # regime == "high": iterated blur -> quantize -> threshold-jitter
    data = img.data.copy()
    for round_index in range(spec.iterations):
        data = gaussian_filter(data, sigma=spec.blur_radius)
        data = np.round(data * (_PHOTOCOPY_LEVELS - 1)) / (_PHOTOCOPY_LEVELS - 1)
        u = uniform_field(mix_seed(spec.seed, round_index), data.shape)
        threshold = 0.5 + spec.jitter * (2.0 * u - 1.0)
        data = np.where(data > threshold, 1.0, 0.0)
    return GrayImage(data)


def ink_ratio(img):
    """Fraction of pixels darker than mid-gray (ink on a white page)."""
    return float(np.mean(img.data < 0.5))


def default_styles(count, spread=12.0, thickness=1.6, density=24.0):
    """``count`` styles whose orientation means tile 0..180 degrees."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [
        StyleSpec(
            class_id=f"style{k}",
            orientation_mean=180.0 * k / count,
            orientation_spread=spread,
            thickness=thickness,
            density=density,
        )
        for k in range(count)
    ]


def emphasis_variants(style, slant=0.3, weight=1.8):
    """Regular / italic / bold / bold-italic variants of one style."""
    return [
        style,
        replace(style, class_id=style.class_id + "_i", slant=slant),
        replace(style, class_id=style.class_id + "_b", weight=weight),
        replace(style, class_id=style.class_id + "_bi", slant=slant,
                weight=weight),
    ]


def ablation_styles():
    """Eight classes for the emphasis ablation: 2 base fonts x 4 variants.

    Both base fonts keep a vertical orientation mean so the stroke
    distribution is symmetric about 90 degrees; they differ only in
    orientation spread (20 vs 45 degrees).  Italic shear then skews that
    symmetric distribution to one side - a signed orientation change that
    separable real-wavelet detail bands cannot distinguish from its mirror
    image, while the complex transform's signed orientation bands can.
    """
    serif = StyleSpec(
        class_id="serif",
        orientation_mean=90.0,
        orientation_spread=20.0,
        thickness=1.6,
        density=24.0,
    )
    sans = replace(serif, class_id="sans", orientation_spread=45.0)
    return [v for base in (serif, sans) for v in emphasis_variants(base)]


def gen_dataset(styles, pages_per_style, noise, seed, out_dir,
                page_width=384, page_height=384):
    """Write PGM pages plus a manifest; returns the manifest path.

    Pages land at ``<out_dir>/<class_id>_page<k>.pgm``.  The manifest
    (``<out_dir>/manifest.txt``) holds lines ``relative/path.pgm,label``
    with LF endings and no header.  Page seeds are
    mix_seed(seed, style_index, page_index); the noise seed for a page is
    mix_seed(page_seed, 1).  Outputs are a pure function of
    (styles, pages_per_style, noise, seed, dimensions).
    """
    styles = validate_styles(styles)
    if len(styles) < 2:
        raise ValueError(f"need >= 2 styles, got {len(styles)}")
    if pages_per_style < 1:
        raise ValueError("pages_per_style must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for style_index, style in enumerate(styles):
        for page_index in range(pages_per_style):
            page_seed = mix_seed(seed, style_index, page_index)
            page = render_page(style, page_width, page_height, page_seed)
            noisy = apply_noise(
                page, replace(noise, seed=mix_seed(page_seed, 1)))
            name = f"{style.class_id}_page{page_index}.pgm"
            with open(os.path.join(out_dir, name), "wb") as handle:
                handle.write(save_pgm(noisy))
            rows.append(f"{name},{style.class_id}")
    manifest_path = os.path.join(out_dir, "manifest.txt")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(rows) + "\n")
    return manifest_path


def read_manifest(path):
    """Read manifest rows as (relative_path, label) tuples."""
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle.read().split("\n"):
            if not line:
                continue
            rel, sep, label = line.partition(",")
            if not sep:
                raise ValueError(f"manifest line without comma: {line!r}")
            out.append((rel, label))
    return out


@dataclass(frozen=True)
class CollageRegionMap:
    """Ground-truth geometry of a collage: which style owns each pixel."""

    labels: tuple          # tuple of tuples, [row][col] -> class id
    region_width: int
    region_height: int

    @property
    def rows(self):
        return len(self.labels)

    @property
    def cols(self):
        return len(self.labels[0])

    def label_at(self, x, y):
        """Class id owning pixel (x, y)."""
        col = min(int(x) // self.region_width, self.cols - 1)
        row = min(int(y) // self.region_height, self.rows - 1)
        return self.labels[row][col]

    def block_truth(self, page_width, page_height, config):
        """Per-block labels for a block grid over this collage.

        Returns a list of (origin_x, origin_y, label, straddles) in the
        same order partition_blocks visits blocks (row-major).  ``label``
        is the region owning the block's center; ``straddles`` is True
        when the block overlaps more than one region.
        """
        stride_x = config.stride_x
        stride_y = config.stride_y
        out = []
        for oy in range(0, page_height - config.block_height + 1, stride_y):
            for ox in range(0, page_width - config.block_width + 1, stride_x):
                col_a = ox // self.region_width
                col_b = (ox + config.block_width - 1) // self.region_width
                row_a = oy // self.region_height
                row_b = (oy + config.block_height - 1) // self.region_height
                straddles = (col_a != col_b) or (row_a != row_b)
                label = self.label_at(ox + config.block_width // 2,
                                      oy + config.block_height // 2)
                out.append((ox, oy, label, straddles))
        return out


def make_collage(styles, layout, seed, page_width=None, page_height=None):
    """Compose a page whose rectangular regions use different styles.

    ``layout`` is a rectangular grid (sequence of equal-length rows) of
    indices into ``styles``.  Regions are equal rectangles tiling the
    page; each is rendered independently with seed
    mix_seed(seed, row, col).  Page dimensions default to 192 per region
    axis and must be divisible by the layout shape.

    Returns (GrayImage, CollageRegionMap).

    Raises
    ------
    ValueError
        If the layout is ragged or has fewer than 2 regions, if the page
        does not divide evenly into the layout grid, or if regions come
        out smaller than the 192-pixel render minimum.
    """
    layout = [list(row) for row in layout]
    if not layout or not layout[0]:
        raise ValueError("layout must be a non-empty grid")
    cols = len(layout[0])
    if any(len(row) != cols for row in layout):
        raise ValueError("layout rows must all have the same length")
    rows = len(layout)
    if rows * cols < 2:
        raise ValueError("collage needs at least 2 regions")
    styles = list(styles)
    for row in layout:
        for idx in row:
            if not 0 <= idx < len(styles):
                raise ValueError(f"layout index {idx} out of range")
    if page_width is None:
        page_width = 192 * cols
    if page_height is None:
        page_height = 192 * rows
    if page_width % cols or page_height % rows:
        raise ValueError(
            f"page {page_width}x{page_height} does not tile into "
            f"{rows}x{cols} equal regions"
        )
    region_w = page_width // cols
    region_h = page_height // rows
    if region_w < 192 or region_h < 192:
        raise ValueError(
            f"regions of {region_w}x{region_h} are below the 192-pixel "
            f"render minimum"
        )
    page = np.ones((page_height, page_width), dtype=np.float64)
    labels = []
    for r in range(rows):
        row_labels = []
        for c in range(cols):
            style = styles[layout[r][c]]
            tile = render_page(style, region_w, region_h,
                               mix_seed(seed, r, c))
            page[r * region_h:(r + 1) * region_h,
                 c * region_w:(c + 1) * region_w] = tile.data
            row_labels.append(style.class_id)
        labels.append(tuple(row_labels))
    region_map = CollageRegionMap(
        labels=tuple(labels),
        region_width=region_w,
        region_height=region_h,
    )
    return GrayImage(page), region_map
