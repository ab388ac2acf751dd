"""Finite-difference oracles and random instances shared by the tests."""
import numpy as np


def central_difference(fun, x, index, h=1e-6):
    """``(fun(x + h e_i) - fun(x - h e_i)) / 2h`` without modifying ``x``."""
    xp = x.copy()
    xp[index] += h
    xm = x.copy()
    xm[index] -= h
    return (fun(xp) - fun(xm)) / (2 * h)


def fd_agreement(fun, x, analytic, indices, h=1e-6, rtol=1e-4, atol=1e-7):
    """Fraction of ``indices`` where ``analytic`` matches central differences of ``fun``.

    A coordinate passes when ``|g - fd| <= rtol * max(|g|, |fd|)`` or both
    are below ``atol``.
    """
    ok = 0
    worst = 0.0
    for idx in indices:
        fd = central_difference(fun, x, idx, h)
        g = analytic[idx]
        scale = max(abs(g), abs(fd))
        if scale < atol:
            ok += 1
            continue
        rel = abs(g - fd) / scale
        worst = max(worst, rel)
        ok += rel <= rtol
    return ok / len(indices), worst


def all_indices(shape):
    return list(np.ndindex(*shape))


def off_grid_flow(rng, shape, max_norm=1.5, margin=0.15):
    """Random flow whose components stay ``margin`` away from integers (no bilinear kinks)."""
    T1, H, W = shape
    lim = max_norm / np.sqrt(2)
    v = rng.uniform(-lim, lim, (T1, H, W, 2))
    for _ in range(100):
        frac = v - np.floor(v)
        bad = (frac < margin) | (frac > 1 - margin)
        if not bad.any():
            break
        v[bad] = rng.uniform(-lim, lim, bad.sum())
    return v


def random_instance(seed, frames=3, size=8, channels=1):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, (frames, size, size, channels))
    v = off_grid_flow(rng, (frames - 1, size, size))
    return rng, u, v
