"""Synthetic sequences with exact ground-truth motion.

Frames are samples of a smooth procedural texture (a sum of random plane
waves), so a moved frame can be evaluated exactly at any subpixel position.
"""
from __future__ import annotations

import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True)
class WaveTexture:
    """``0.5 + 0.45 * sum_i a_i cos(2 pi f_i . p + phase_i) / sum_i a_i``, values in [0.05, 0.95]."""

    freqs: np.ndarray
    phases: np.ndarray
    amps: np.ndarray

    @classmethod
    def random(cls, rng, n_waves=24, min_period=5.0, max_period=20.0):
        period = rng.uniform(min_period, max_period, n_waves)
        theta = rng.uniform(0, 2 * np.pi, n_waves)
        freqs = np.stack([np.cos(theta), np.sin(theta)], axis=-1) / period[:, None]
        return cls(freqs, rng.uniform(0, 2 * np.pi, n_waves), rng.uniform(0.5, 1.0, n_waves))

    def __call__(self, x, y):
        phase = 2 * np.pi * (np.multiply.outer(x, self.freqs[:, 0]) + np.multiply.outer(y, self.freqs[:, 1]))
        s = np.sum(self.amps * np.cos(phase + self.phases), axis=-1)
        return 0.5 + 0.45 * s / self.amps.sum()


def _render(textures, x, y):
    return np.stack([tex(x, y) for tex in textures], axis=-1)


def translating_sequence(height=64, width=64, frames=8, shift=(1.0, 0.0), channels=1, seed=0):
    """Texture moving by ``shift`` = (dx, dy) pixels per frame.

    Returns ``(u, vfwd, wbwd)``: the (T, H, W, C) sequence and the exact
    forward and backward flows.
    """
    rng = np.random.default_rng(seed)
    textures = [WaveTexture.random(rng) for _ in range(channels)]
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    dx, dy = shift
    u = np.stack([_render(textures, xx - k * dx, yy - k * dy) for k in range(frames)])
    flow = np.zeros((frames - 1, height, width, 2))
    flow[..., 0] = dx
    flow[..., 1] = dy
    return u, flow, flow.copy()


def rotating_sequence(height=64, width=64, frames=8, degrees=2.0, channels=1, seed=0, center=None):
    """Texture rotating by ``degrees`` per frame about ``center`` (default: frame centre)."""
    rng = np.random.default_rng(seed)
    textures = [WaveTexture.random(rng) for _ in range(channels)]
    cx, cy = center if center is not None else ((width - 1) / 2, (height - 1) / 2)
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    th = np.deg2rad(degrees)

    def rotate(x, y, angle):
        c, s = np.cos(angle), np.sin(angle)
        return cx + c * (x - cx) - s * (y - cy), cy + s * (x - cx) + c * (y - cy)

    frames_ = []
    for k in range(frames):
        sx, sy = rotate(xx, yy, -k * th)
        frames_.append(_render(textures, sx, sy))
    u = np.stack(frames_)
    fx, fy = rotate(xx, yy, th)
    bx, by = rotate(xx, yy, -th)
    vfwd = np.zeros((frames - 1, height, width, 2))
    vfwd[..., 0] = fx - xx
    vfwd[..., 1] = fy - yy
    wbwd = np.zeros_like(vfwd)
    wbwd[..., 0] = xx - bx
    wbwd[..., 1] = yy - by
    return u, vfwd, wbwd


def ramp_sequence(height=16, width=16, frames=4, slope=0.02, seed=0):
    """Affine sequence ``a (x - t) + b y + c`` moving by one pixel per frame.

    Constant along the exact flow lines with exact (integer) bilinear
    sampling and exact central differences, border included.
    """
    rng = np.random.default_rng(seed)
    b = rng.uniform(-0.5, 0.5) * slope
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    u = np.stack([0.2 + slope * (xx - k) + b * yy for k in range(frames)])[..., None]
    flow = np.zeros((frames - 1, height, width, 2))
    flow[..., 0] = 1.0
    return u, flow, flow.copy()


def square_hole(shape, frame, top, left, size):
    """Mask with a ``size`` x ``size`` hole in one frame."""
    mask = np.zeros(shape[:3], bool)
    mask[frame, top : top + size, left : left + size] = True
    return mask


def zooming_sequence(height=64, width=64, frames=8, rate=1.05, channels=1, seed=0, center=None):
    """Texture scaled by ``rate`` per frame about ``center``: a strongly divergent flow.

    Forward flow ``(rate - 1)(x - c)``, backward flow ``(1 - 1/rate)(x - c)``.
    """
    rng = np.random.default_rng(seed)
    textures = [WaveTexture.random(rng) for _ in range(channels)]
    cx, cy = center if center is not None else ((width - 1) / 2, (height - 1) / 2)
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    u = np.stack(
        [_render(textures, cx + (xx - cx) / rate**k, cy + (yy - cy) / rate**k) for k in range(frames)]
    )
    rel = np.stack([xx - cx, yy - cy], axis=-1)
    vfwd = np.broadcast_to((rate - 1) * rel, (frames - 1, height, width, 2)).copy()
    wbwd = np.broadcast_to((1 - 1 / rate) * rel, (frames - 1, height, width, 2)).copy()
    return u, vfwd, wbwd


def split_flow(frames, height, width, speed=1.0):
    """Horizontal flow whose left and right halves move apart at ``speed`` px/frame.

    Negative ``speed`` makes the halves collide.  The jump gives a large
    central-difference divergence along the middle column.
    """
    flow = np.zeros((frames - 1, height, width, 2))
    flow[:, :, : width // 2, 0] = -speed
    flow[:, :, width // 2 :, 0] = speed
    return flow
