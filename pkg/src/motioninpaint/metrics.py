"""Restoration and flow error measures."""
from __future__ import annotations

import math

import numpy as np

from .grid import as_sequence


def _mse(diff, where):
    if not where.any():
        return float("nan")
    return float(np.mean(diff[where] ** 2))


def psnr(mse, peak=1.0):
    """``10 log10(peak^2 / mse)``; ``inf`` for a zero error, ``nan`` for an empty region."""
    if math.isnan(mse):
        return float("nan")
    if mse == 0:
        return float("inf")
    return 10.0 * math.log10(peak * peak / mse)


def image_metrics(restored, reference, mask=None):
    """MSE and PSNR inside the locus, outside it and globally, plus max abs difference.

    Intensities are in [0, 1], so PSNR uses a unit peak.
    """
    restored = as_sequence(restored)
    reference = as_sequence(reference)
    if restored.shape != reference.shape:
        raise ValueError(f"shape mismatch: {restored.shape} vs {reference.shape}")
    if mask is None:
        mask = np.zeros(reference.shape[:3], bool)
    mask = np.asarray(mask, bool)
    if mask.shape != reference.shape[:3]:
        raise ValueError(f"mask shape {mask.shape} does not match {reference.shape[:3]}")
    diff = restored - reference
    full = np.broadcast_to(mask[..., None], diff.shape)
    report = {}
    for name, where in (("omega", full), ("known", ~full), ("global", np.ones_like(full))):
        mse = _mse(diff, where)
        report[f"mse_{name}"] = mse
        report[f"psnr_{name}"] = psnr(mse)
    report["max_abs"] = float(np.max(np.abs(diff)))
    return report


def endpoint_error(flow, reference, border=0):
    """Mean Euclidean distance between displacement vectors, ``border`` pixels trimmed."""
    e = np.linalg.norm(np.asarray(flow, float) - np.asarray(reference, float), axis=-1)
    if border:
        e = e[:, border:-border, border:-border]
    return float(np.mean(e))


def angular_error(flow, reference, border=0):
    """Mean angle in degrees between the space-time vectors ``(v1, v2, 1)``."""
    flow = np.asarray(flow, float)
    reference = np.asarray(reference, float)
    num = 1.0 + np.sum(flow * reference, axis=-1)
    den = np.sqrt(1.0 + np.sum(flow**2, axis=-1)) * np.sqrt(1.0 + np.sum(reference**2, axis=-1))
    ang = np.degrees(np.arccos(np.clip(num / den, -1.0, 1.0)))
    if border:
        ang = ang[:, border:-border, border:-border]
    return float(np.mean(ang))


def flow_metrics(flow, reference, border=0):
    if np.shape(flow) != np.shape(reference):
        raise ValueError(f"shape mismatch: {np.shape(flow)} vs {np.shape(reference)}")
    return {"epe": endpoint_error(flow, reference, border), "angular_error": angular_error(flow, reference, border)}


def format_report(report):
    """One ``key: value`` line per entry."""
    return "".join(f"{k}: {v!r}\n" if isinstance(v, float) else f"{k}: {v}\n" for k, v in report.items())
