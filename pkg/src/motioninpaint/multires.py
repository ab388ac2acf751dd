"""Spatial pyramids, cross-level transfer and the coarse-to-fine pipeline."""
from __future__ import annotations

import dataclasses
import logging
from typing import List, Optional

import numpy as np
from scipy import ndimage

from .energy import INPAINT_DENOISE, PURE_INPAINT, EnergyConfig
from .errors import DataError
from .flow import FlowSolverParams, backward_flow, solve_flow
from .grid import as_sequence, check_mask, reverse_flow, time_reverse
from .solver import inpaint_level

log = logging.getLogger(__name__)

MASK_METHODS = ("nearest", "threshold")


@dataclasses.dataclass(frozen=True)
class PyramidSpec:
    """``levels`` resolutions, each ``scale_factor`` times the previous one per axis.

    Level 0 is the input resolution.  Images are low-passed with a
    Gaussian of stddev ``0.5 * (1 / scale_factor - 1)`` before each
    reduction.
    """

    levels: int = 4
    scale_factor: float = 0.5
    mask_method: str = "nearest"
    min_size: int = 8

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        if not 0 < self.scale_factor < 1:
            raise ValueError(f"scale_factor must lie in (0, 1), got {self.scale_factor}")
        if self.mask_method not in MASK_METHODS:
            raise ValueError(f"mask_method must be one of {MASK_METHODS}, got {self.mask_method!r}")

    @property
    def sigma(self):
        return 0.5 * (1.0 / self.scale_factor - 1.0)

    def shapes(self, height, width):
        """(H, W) of every level, finest first.  Raises if a level is too small."""
        out = []
        for level in range(self.levels):
            s = self.scale_factor**level
            shape = (int(round(height * s)), int(round(width * s)))
            if min(shape) < self.min_size:
                raise DataError(
                    f"level {level} would be {shape[0]}x{shape[1]}, below the "
                    f"{self.min_size}x{self.min_size} minimum; use fewer levels"
                )
            out.append(shape)
        return out

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass
class PyramidLevel:
    index: int
    image: np.ndarray
    mask: np.ndarray
    vfwd: Optional[np.ndarray] = None
    wbwd: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# resampling


def _source_coords(n_dst, n_src):
    # pixel centres aligned: (i + 1/2) n_src / n_dst - 1/2
    return (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5


def resample(field, shape, order=1):
    """Resample the two spatial axes of a (T, H, W, ...) array to ``shape``.

    Pixel centres are aligned; samples past the border repeat the edge.
    """
    field = np.asarray(field, dtype=float)
    T, H, W = field.shape[:3]
    h, w = shape
    if (h, w) == (H, W):
        return field.copy()
    rows = _source_coords(h, H)
    cols = _source_coords(w, W)
    coords = np.array(np.meshgrid(rows, cols, indexing="ij"))
    flat = field.reshape(T, H, W, -1)
    out = np.empty((T, h, w, flat.shape[-1]))
    for t in range(T):
        for c in range(flat.shape[-1]):
            out[t, :, :, c] = ndimage.map_coordinates(flat[t, :, :, c], coords, order=order, mode="nearest")
    return out.reshape((T, h, w) + field.shape[3:])


def smooth(field, sigma):
    """Gaussian low-pass over the spatial axes of a (T, H, W, ...) array."""
    field = np.asarray(field, dtype=float)
    if sigma <= 0:
        return field.copy()
    sig = (0, sigma, sigma) + (0,) * (field.ndim - 3)
    return ndimage.gaussian_filter(field, sig, mode="nearest")


def reduce(field, shape, sigma):
    return resample(smooth(field, sigma), shape)


def coarsen_mask(mask, shape, method="nearest", sigma=0.5):
    """Missing-data mask at a coarser ``shape``.

    ``nearest`` copies the flag of the fine pixel nearest to each coarse
    pixel centre.  ``threshold`` low-passes the known-pixel indicator like
    the images and marks a coarse pixel missing unless the result is 1,
    so any missing fine pixel in its support makes it missing.
    """
    mask = np.asarray(mask, dtype=bool)
    T, H, W = mask.shape
    h, w = shape
    if h > H or w > W:
        raise ValueError(f"cannot coarsen a {H}x{W} mask to {h}x{w}")
    if (h, w) == (H, W):
        return mask.copy()
    if method == "nearest":
        rows = np.clip(np.floor(_source_coords(h, H) + 0.5), 0, H - 1).astype(int)
        cols = np.clip(np.floor(_source_coords(w, W) + 0.5), 0, W - 1).astype(int)
        return mask[:, rows][:, :, cols]
    if method == "threshold":
        known = reduce((~mask).astype(float), shape, sigma)
        return known < 1.0 - 1e-9
    raise ValueError(f"mask method must be one of {MASK_METHODS}, got {method!r}")


def build_pyramid(u0, mask, spec=PyramidSpec()):
    """Levels finest first; images smoothed and resampled level by level."""
    u0 = as_sequence(u0)
    mask = check_mask(mask, u0)
    shapes = spec.shapes(*u0.shape[1:3])
    levels = [PyramidLevel(0, u0.copy(), mask.copy())]
    for i, shape in enumerate(shapes[1:], start=1):
        prev = levels[-1]
        image = reduce(prev.image, shape, spec.sigma)
        coarse = coarsen_mask(prev.mask, shape, spec.mask_method, spec.sigma)
        levels.append(PyramidLevel(i, image, coarse))
    return levels


def rescale_flow(flow, shape):
    """Bilinear resampling of a flow, displacements rescaled by the size ratio per axis."""
    flow = np.asarray(flow, dtype=float)
    H, W = flow.shape[1:3]
    out = resample(flow, shape)
    out[..., 0] *= shape[1] / W
    out[..., 1] *= shape[0] / H
    return out


def upsample_flow(flow, shape):
    """Bilinear upsampling of a flow to a finer ``shape``."""
    H, W = np.shape(flow)[1:3]
    if shape[0] < H or shape[1] < W:
        raise ValueError(f"cannot upsample a {H}x{W} flow to {shape[0]}x{shape[1]}")
    return rescale_flow(flow, shape)


def upsample_image_pure_inpaint(u_coarse, u0_level, mask_level):
    """Bilinear upsampling of ``u_coarse`` inside the locus, ``u0_level`` elsewhere."""
    u0_level = as_sequence(u0_level)
    mask_level = check_mask(mask_level, u0_level)
    up = resample(as_sequence(u_coarse), u0_level.shape[1:3])
    return np.where(mask_level[..., None], up, u0_level)


def _known_mean_fill(u0, mask):
    # per-frame, per-channel mean of the known pixels (0.5 for an empty frame)
    u = u0.copy()
    for t in range(u.shape[0]):
        holes = mask[t]
        if not holes.any():
            continue
        known = ~holes
        fill = u0[t][known].mean(axis=0) if known.any() else np.full(u.shape[-1], 0.5)
        u[t][holes] = fill
    return u


def coarsest_inpaint(u0, mask, config=EnergyConfig(), iterations=None, trace=None):
    """Motion-adaptive fill at the coarsest level: zero flow, variant-1 temporal term.

    Holes start from the mean of the known pixels of their frame.  Only
    the locus evolves.
    """
    u0 = as_sequence(u0)
    mask = check_mask(mask, u0)
    if not mask.any():
        return u0.copy()
    cfg = config.replace(e3_variant=1, e3_scheme="adjoint", mode=PURE_INPAINT)
    zero = np.zeros((u0.shape[0] - 1,) + u0.shape[1:3] + (2,))
    return inpaint_level(_known_mean_fill(u0, mask), u0, zero, zero, mask, cfg, iterations, trace)


# ---------------------------------------------------------------------------
# flow-only estimation


def estimate_flow(u, spec=PyramidSpec(), params=FlowSolverParams(), init=None):
    """Coarse-to-fine forward flow of a complete sequence."""
    u = as_sequence(u)
    levels = build_pyramid(u, np.zeros(u.shape[:3], bool), spec)
    coarse = levels[-1].image
    v = np.zeros((u.shape[0] - 1,) + coarse.shape[1:3] + (2,))
    if init is not None:
        v = rescale_flow(init, coarse.shape[1:3])
    for lev in reversed(levels):
        if v.shape[1:3] != lev.image.shape[1:3]:
            v = upsample_flow(v, lev.image.shape[1:3])
        v = solve_flow(lev.image, v, params)
    return v


def estimate_backward_flow(u, vfwd=None, spec=PyramidSpec(), params=FlowSolverParams()):
    """Coarse-to-fine backward flow, computed as the forward flow of the reversed sequence."""
    u = as_sequence(u)
    init = None if vfwd is None else reverse_flow(vfwd)
    return reverse_flow(estimate_flow(time_reverse(u), spec, params, init))


# ---------------------------------------------------------------------------
# full pipeline


def run_pipeline(u0, mask, config=EnergyConfig(), spec=PyramidSpec(), flow_params=FlowSolverParams(),
                 trace=None):
    """Interleaved flow recovery and inpainting, coarse to fine.

    Returns ``(u, vfwd, wbwd)`` at full resolution.  ``trace``, if a list,
    receives one ``(level, energies)`` entry per image descent.
    """
    u0 = as_sequence(u0)
    mask = check_mask(mask, u0)
    levels = build_pyramid(u0, mask, spec)
    T = u0.shape[0]
    top = levels[-1]

    energies: List[float] = []
    u = coarsest_inpaint(top.image, top.mask, config, trace=energies)
    _record(trace, top.index, energies)
    v = np.zeros((T - 1,) + top.image.shape[1:3] + (2,))
    w = None
    for lev in reversed(levels[:-1]):
        shape = lev.image.shape[1:3]
        if T > 1:
            v = solve_flow(u, v, flow_params)
            w = backward_flow(u, v, flow_params, init=w)
            v = upsample_flow(v, shape)
            w = upsample_flow(w, shape)
        else:
            v = np.zeros((0,) + shape + (2,))
            w = v.copy()
        if config.mode == INPAINT_DENOISE:
            u_init = resample(u, shape)
        else:
            u_init = upsample_image_pure_inpaint(u, lev.image, lev.mask)
        energies = []
        u = inpaint_level(u_init, lev.image, v, w, lev.mask, config, trace=energies)
        _record(trace, lev.index, energies)
        log.info("level %d (%dx%d) done", lev.index, *shape)
    if len(levels) == 1 and config.mode == INPAINT_DENOISE:
        # single level: the coarsest fill only covers the locus
        energies = []
        zero = np.zeros((T - 1,) + u0.shape[1:3] + (2,))
        u = inpaint_level(u, u0, zero, zero, mask, config, trace=energies)
        _record(trace, 0, energies)
    if T > 1:
        v = solve_flow(u, v, flow_params)
        w = backward_flow(u, v, flow_params, init=w)
    else:
        v = np.zeros((0,) + u0.shape[1:3] + (2,))
        w = v.copy()
    return u, v, w


def _record(trace, level, energies):
    if trace is not None:
        trace.append((level, list(energies)))
