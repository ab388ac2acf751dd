"""Synthetic blotch degradation: random polygons, optional Gaussian noise."""
from __future__ import annotations

import dataclasses

import numpy as np
from PIL import Image, ImageDraw

from .errors import DataError
from .grid import as_sequence

FILL_MODES = ("constant", "noise")


@dataclasses.dataclass(frozen=True)
class DegradationSpec:
    """Parameters of :func:`degrade`.

    ``size`` is the range of the polygon radius as a fraction of the
    smaller frame side.  With probability ``overlap`` a blotch reappears,
    slightly moved, in the next frame.  ``noise`` is the stddev of the
    additive Gaussian noise in intensity units.
    """

    seed: int = 0
    blotches: int = 2
    vertices: tuple = (5, 9)
    size: tuple = (0.1, 0.15)
    overlap: float = 0.4
    noise: float = 0.0
    fill: str = "constant"
    fill_value: float = 0.0

    def __post_init__(self):
        if self.blotches < 0:
            raise ValueError("blotch count must be non-negative")
        lo, hi = self.vertices
        if not 3 <= lo <= hi:
            raise ValueError(f"vertex range must satisfy 3 <= min <= max, got {self.vertices}")
        lo, hi = self.size
        if not 0 < lo <= hi <= 0.5:
            raise ValueError(f"size range must satisfy 0 < min <= max <= 0.5, got {self.size}")
        if not 0 <= self.overlap <= 1:
            raise ValueError("overlap probability must lie in [0, 1]")
        if self.noise < 0:
            raise ValueError("noise stddev must be non-negative")
        if self.fill not in FILL_MODES:
            raise ValueError(f"fill must be one of {FILL_MODES}, got {self.fill!r}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _polygon(rng, cx, cy, radius, n):
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = radius * rng.uniform(0.5, 1.0, n)
    return [(float(cx + r * np.cos(a)), float(cy + r * np.sin(a))) for a, r in zip(angles, radii)]


def _rasterize(shape, polygon):
    im = Image.new("L", (shape[1], shape[0]), 0)
    ImageDraw.Draw(im).polygon(polygon, fill=255)
    return np.asarray(im) > 0


def blotch_support(shape, spec):
    """(T, H, W) bool support of the polygons drawn by :func:`degrade`."""
    T, H, W = shape
    side = min(H, W)
    if side * spec.size[0] < 1.0:
        raise DataError(f"a {H}x{W} frame is too small for blotch radius fraction {spec.size[0]}")
    rng = np.random.default_rng(spec.seed)
    support = np.zeros((T, H, W), bool)
    carried = []
    for t in range(T):
        shapes = []
        for cx, cy, radius, n in carried:
            dx, dy = rng.uniform(-2, 2, 2)
            shapes.append((cx + dx, cy + dy, radius, n))
        for _ in range(spec.blotches):
            radius = rng.uniform(*spec.size) * side
            cx = rng.uniform(radius, W - 1 - radius)
            cy = rng.uniform(radius, H - 1 - radius)
            n = int(rng.integers(spec.vertices[0], spec.vertices[1] + 1))
            shapes.append((cx, cy, radius, n))
        carried = []
        for cx, cy, radius, n in shapes:
            support[t] |= _rasterize((H, W), _polygon(rng, cx, cy, radius, n))
            if rng.random() < spec.overlap:
                carried.append((cx, cy, radius, n))
    return support


def degrade(u, spec=DegradationSpec()):
    """Blotch ``u`` and optionally add noise.

    Returns ``(degraded, mask)``.  ``mask`` is the set of pixels whose
    value the blotches changed (noise excluded), so pixels whose original
    value already equals the fill value are not marked.
    """
    u = as_sequence(u)
    support = blotch_support(u.shape[:3], spec)
    rng = np.random.default_rng([spec.seed, 1])
    out = u.copy()
    if spec.fill == "constant":
        fill = np.full(u.shape, spec.fill_value)
    else:
        fill = rng.uniform(0.0, 1.0, u.shape)
    out[support] = fill[support]
    mask = support & np.any(out != u, axis=-1)
    if spec.noise > 0:
        out = np.clip(out + rng.normal(0.0, spec.noise, u.shape), 0.0, 1.0)
    return out, mask


def degraded_fraction(mask):
    return float(np.mean(mask))
