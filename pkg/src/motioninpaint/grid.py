"""Spatiotemporal fields, subpixel sampling and flow-line differences.

Array conventions used across the package:

* image sequence: ``(T, H, W, C)`` float array, intensities in [0, 1]
* flow field: ``(T - 1, H, W, 2)`` with ``[..., 0]`` the horizontal (column)
  displacement and ``[..., 1]`` the vertical (row) displacement
* mask: ``(T, H, W)`` bool, True inside the missing-data locus

A forward flow slice ``v[k]`` maps frame ``k`` to ``k + 1``.  A backward flow
slice ``w[k - 1]`` belongs to frame ``k`` and ``x - w[k - 1](x)`` is the
matching point in frame ``k - 1``.
"""
from __future__ import annotations

import enum

import numpy as np


class Interpolation(str, enum.Enum):
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"


def as_sequence(u):
    """Return ``u`` as a float ``(T, H, W, C)`` array (adds a channel axis to 3-D input)."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 3:
        u = u[..., None]
    if u.ndim != 4:
        raise ValueError(f"expected a (T, H, W[, C]) sequence, got shape {u.shape}")
    if min(u.shape) < 1:
        raise ValueError(f"empty sequence of shape {u.shape}")
    return u


def check_flow(flow, u):
    flow = np.asarray(flow, dtype=float)
    T, H, W = u.shape[:3]
    if flow.shape != (max(T - 1, 0), H, W, 2):
        raise ValueError(
            f"flow shape {flow.shape} does not match a {T}-frame {H}x{W} sequence"
        )
    return flow


def check_mask(mask, u):
    mask = np.asarray(mask)
    if mask.shape != u.shape[:3]:
        raise ValueError(f"mask shape {mask.shape} does not match sequence {u.shape[:3]}")
    return mask.astype(bool)


# ---------------------------------------------------------------------------
# interpolation kernels


def _catmull_rom(t):
    t2 = t * t
    t3 = t2 * t
    w = np.stack(
        [
            0.5 * (-t3 + 2 * t2 - t),
            0.5 * (3 * t3 - 5 * t2 + 2),
            0.5 * (-3 * t3 + 4 * t2 + t),
            0.5 * (t3 - t2),
        ],
        axis=-1,
    )
    dw = np.stack(
        [
            0.5 * (-3 * t2 + 4 * t - 1),
            0.5 * (9 * t2 - 10 * t),
            0.5 * (-9 * t2 + 8 * t + 1),
            0.5 * (3 * t2 - 2 * t),
        ],
        axis=-1,
    )
    return w, dw


def _linear(t):
    w = np.stack([1.0 - t, t], axis=-1)
    dw = np.stack([-np.ones_like(t), np.ones_like(t)], axis=-1)
    return w, dw


class Warp:
    """Interpolation weights of a frame sampled at ``grid + sign * disp``.

    Target points outside ``[0, W-1] x [0, H-1]`` are flagged in ``inside``
    and redirected to the grid point itself, so :meth:`sample` returns the
    frame value at ``x`` there.  Callers zero flow-line differences at those
    points, which is the clamp-to-self boundary rule.

    The weights are kept so that the exact transpose of the sampling
    operator (:meth:`transpose`) and the spatial derivative of the
    interpolant at the target point (:meth:`sample_grad`) are available.
    """

    def __init__(self, disp, sign=1.0, interpolation=Interpolation.BILINEAR):
        disp = np.asarray(disp, dtype=float)
        H, W = disp.shape[:2]
        self.shape = (H, W)
        self.interpolation = Interpolation(interpolation)
        yy, xx = np.mgrid[0:H, 0:W].astype(float)
        px = xx + sign * disp[..., 0]
        py = yy + sign * disp[..., 1]
        inside = (px >= 0) & (px <= W - 1) & (py >= 0) & (py <= H - 1)
        self.inside = inside
        px = np.where(inside, px, xx).ravel()
        py = np.where(inside, py, yy).ravel()

        x0 = np.clip(np.floor(px), 0, max(W - 2, 0))
        y0 = np.clip(np.floor(py), 0, max(H - 2, 0))
        tx = px - x0
        ty = py - y0
        if self.interpolation is Interpolation.BILINEAR:
            offsets = np.arange(2)
            wx, dwx = _linear(tx)
            wy, dwy = _linear(ty)
        else:
            offsets = np.arange(-1, 3)
            wx, dwx = _catmull_rom(tx)
            wy, dwy = _catmull_rom(ty)
        xi = np.clip(x0[:, None] + offsets, 0, W - 1).astype(np.intp)
        yi = np.clip(y0[:, None] + offsets, 0, H - 1).astype(np.intp)
        n = offsets.size
        # (N, n_y, n_x) tensor-product stencil, flattened to (N, n*n)
        self.index = (yi[:, :, None] * W + xi[:, None, :]).reshape(-1, n * n)
        self.weight = (wy[:, :, None] * wx[:, None, :]).reshape(-1, n * n)
        self.dweight_x = (wy[:, :, None] * dwx[:, None, :]).reshape(-1, n * n)
        self.dweight_y = (dwy[:, :, None] * wx[:, None, :]).reshape(-1, n * n)

    def _apply(self, field, weight):
        H, W = self.shape
        field = np.asarray(field, dtype=float)
        tail = field.shape[2:]
        flat = field.reshape(H * W, -1)
        out = np.einsum("nk,nkc->nc", weight, flat[self.index])
        return out.reshape((H, W) + tail)

    def sample(self, field):
        """Values of ``field`` (H, W, ...) at the target points."""
        return self._apply(field, self.weight)

    def sample_grad(self, field):
        """Derivatives of the interpolant at the target points, stacked (d/dx, d/dy) last."""
        gx = self._apply(field, self.dweight_x)
        gy = self._apply(field, self.dweight_y)
        return np.stack([gx, gy], axis=-1)

    def transpose(self, values):
        """Exact adjoint of :meth:`sample`: scatter ``values`` back onto the grid."""
        H, W = self.shape
        values = np.asarray(values, dtype=float)
        tail = values.shape[2:]
        flat = values.reshape(H * W, -1)
        idx = self.index.ravel()
        out = np.empty((H * W, flat.shape[1]))
        for c in range(flat.shape[1]):
            contrib = self.weight * flat[:, c : c + 1]
            out[:, c] = np.bincount(idx, weights=contrib.ravel(), minlength=H * W)
        return out.reshape((H, W) + tail)


def sample(frame, x, y, interpolation=Interpolation.BILINEAR):
    """Sample ``frame`` at the subpixel point ``(x, y)`` (column, row).

    Points outside the frame are clamped to the frame rectangle.
    """
    frame = np.asarray(frame, dtype=float)
    H, W = frame.shape[:2]
    x = float(np.clip(x, 0, W - 1))
    y = float(np.clip(y, 0, H - 1))
    disp = np.zeros((H, W, 2))
    disp[0, 0] = (x, y)
    return Warp(disp, interpolation=interpolation).sample(frame)[0, 0]


# ---------------------------------------------------------------------------
# flow-line differences


def lie_forward(u, v, k, interpolation=Interpolation.BILINEAR):
    """Forward flow-line difference ``u[k+1](x + v[k](x)) - u[k](x)`` (h = 1).

    Zero wherever ``x + v[k](x)`` leaves the frame.
    """
    u = as_sequence(u)
    T = u.shape[0]
    if not 0 <= k <= T - 2:
        raise IndexError(f"forward frame index {k} outside [0, {T - 2}]")
    v = check_flow(v, u)
    warp = Warp(v[k], 1.0, interpolation)
    return np.where(warp.inside[..., None], warp.sample(u[k + 1]) - u[k], 0.0)


def lie_backward(u, w, k, interpolation=Interpolation.BILINEAR):
    """Backward flow-line difference ``u[k](x) - u[k-1](x - w_k(x))`` (h = 1).

    ``w_k`` is stored in ``w[k - 1]``.  Zero wherever ``x - w_k(x)`` leaves
    the frame.
    """
    u = as_sequence(u)
    T = u.shape[0]
    if not 1 <= k <= T - 1:
        raise IndexError(f"backward frame index {k} outside [1, {T - 1}]")
    w = check_flow(w, u)
    warp = Warp(w[k - 1], -1.0, interpolation)
    return np.where(warp.inside[..., None], u[k] - warp.sample(u[k - 1]), 0.0)


# ---------------------------------------------------------------------------
# spatial differences


def spatial_gradient(frame):
    """Central differences inside, one-sided differences on the border.

    ``frame`` is (H, W, ...); the result has an extra trailing axis holding
    (d/dx, d/dy).
    """
    frame = np.asarray(frame, dtype=float)
    if frame.shape[0] < 2 or frame.shape[1] < 2:
        raise ValueError("spatial_gradient needs at least 2x2 pixels")
    gy, gx = np.gradient(frame, axis=(0, 1))
    return np.stack([gx, gy], axis=-1)


def _diff_adjoint(g, axis):
    """Transpose of ``np.gradient`` (edge_order=1) along ``axis``."""
    g = np.moveaxis(g, axis, 0)
    out = np.zeros_like(g)
    half = 0.5 * g[1:-1]
    out[2:] += half
    out[:-2] -= half
    out[1] += g[0]
    out[0] -= g[0]
    out[-1] += g[-1]
    out[-2] -= g[-1]
    return np.moveaxis(out, 0, axis)


def gradient_adjoint(grad):
    """Exact transpose of :func:`spatial_gradient`.

    On interior pixels this equals minus the central-difference divergence.
    """
    grad = np.asarray(grad, dtype=float)
    return _diff_adjoint(grad[..., 0], 1) + _diff_adjoint(grad[..., 1], 0)


def divergence(field):
    """Central-difference divergence of a (H, W, 2) vector field."""
    field = np.asarray(field, dtype=float)
    return np.gradient(field[..., 0], axis=1) + np.gradient(field[..., 1], axis=0)


def flow_divergence_correction(w, k):
    """``F_k = div(w_k) - det(J w_k)`` for the backward flow of frame ``k`` (h = 1).

    ``w`` is a backward flow array; ``w_k`` is ``w[k - 1]``.
    """
    w = np.asarray(w, dtype=float)
    if not 1 <= k <= w.shape[0]:
        raise IndexError(f"no backward flow slice for frame {k}")
    wk = w[k - 1]
    d1y, d1x = np.gradient(wk[..., 0], axis=(0, 1))
    d2y, d2x = np.gradient(wk[..., 1], axis=(0, 1))
    return (d1x + d2y) - (d1x * d2y - d1y * d2x)


# ---------------------------------------------------------------------------
# time reversal


def time_reverse(u):
    """Frames in reverse order; an involution."""
    return np.asarray(u)[::-1].copy()


def reverse_flow(flow):
    """Flow of the time-reversed sequence: ``t -> -flow(T - t)``.

    Maps a forward flow of ``u`` to an initial guess for the forward flow of
    ``time_reverse(u)``, and the forward flow of ``time_reverse(u)`` to the
    backward flow of ``u``.
    """
    return -np.asarray(flow, dtype=float)[::-1]
